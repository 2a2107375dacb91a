import json

import numpy as np
import pytest

from cloudsig import Histogram, class_kl_sym, class_l1
from cloudsig.cli import main

FAST = ["--kmin", "8", "--kmax", "16", "--kstep", "8",
        "--resolution", "64", "--bins", "16", "--threads", "1"]


def _synth(tmp_path, name, seed, n=300):
    out = tmp_path / f"{name}.csv"
    code = main(["synth", "--scene", "mixed", "--n", str(n), "--noise", "0.2",
                 "--seed", str(seed), "--out", str(out)])
    assert code == 0
    return out


@pytest.fixture()
def cloud_file(tmp_path):
    return _synth(tmp_path, "scene", 1)


# --- synth -----------------------------------------------------------------

def test_synth_writes_cloud_and_scheme(tmp_path, capsys):
    out = _synth(tmp_path, "demo", 3)
    assert out.exists()
    assert (tmp_path / "demo.classes").exists()
    assert len(out.read_text().splitlines()) == 300
    stdout = capsys.readouterr().out
    assert "wrote" in stdout and "300 points" in stdout


def test_synth_pair_writes_two_files(tmp_path):
    out = tmp_path / "pair.csv"
    code = main(["synth", "--scene", "deforestation-pair", "--n", "400",
                 "--seed", "2", "--out", str(out)])
    assert code == 0
    assert (tmp_path / "pair_before.csv").exists()
    assert (tmp_path / "pair_after.csv").exists()


# --- compute ---------------------------------------------------------------

def test_compute_writes_csv_and_manifest(tmp_path, cloud_file, capsys):
    out_dir = tmp_path / "out"
    code = main(["compute", str(cloud_file), "--format", "xyz-labeled-csv",
                 "--out-dir", str(out_dir), *FAST])
    assert code == 0
    lines = (out_dir / "scene_geometry.csv").read_text().splitlines()
    assert lines[0] == "index,C_l,C_s,C_p,E_geom,scale_used"
    assert len(lines) == 301
    manifest = json.loads((out_dir / "scene_manifest.json").read_text())
    assert manifest["cloud"]["n_points"] == 300
    assert manifest["config"]["scales"] == [8, 16]
    stdout = capsys.readouterr().out
    assert "scene_geometry.csv" in stdout


def test_compute_custom_name(tmp_path, cloud_file):
    code = main(["compute", str(cloud_file), "--format", "xyz-labeled-csv",
                 "--out-dir", str(tmp_path / "o"), "--name", "renamed", *FAST])
    assert code == 0
    assert (tmp_path / "o" / "renamed_geometry.csv").exists()


def test_compute_is_deterministic(tmp_path, cloud_file):
    for d in ("r1", "r2"):
        assert main(["compute", str(cloud_file), "--format", "xyz-labeled-csv",
                     "--out-dir", str(tmp_path / d), *FAST]) == 0
    a = (tmp_path / "r1" / "scene_geometry.csv").read_bytes()
    b = (tmp_path / "r2" / "scene_geometry.csv").read_bytes()
    assert a == b


# --- signature -------------------------------------------------------------

def test_signature_writes_both_images(tmp_path, cloud_file):
    out_dir = tmp_path / "sig"
    code = main(["signature", str(cloud_file), "--format", "xyz-labeled-csv",
                 "--out-dir", str(out_dir), *FAST])
    assert code == 0
    for f in ("scene_gm.png", "scene_gm.json", "scene_agsm.png",
              "scene_agsm.json", "scene_geometry.csv", "scene_manifest.json"):
        assert (out_dir / f).exists(), f


def test_signature_unlabeled_warns(tmp_path, capsys):
    g = np.random.default_rng(0)
    bare = tmp_path / "bare.csv"
    np.savetxt(bare, g.uniform(-1, 1, (120, 3)), delimiter=",")
    out_dir = tmp_path / "sig"
    code = main(["signature", str(bare), "--out-dir", str(out_dir), *FAST])
    assert code == 0
    assert "skipping the augmented signature" in capsys.readouterr().err
    assert (out_dir / "bare_gm.png").exists()
    assert not (out_dir / "bare_agsm.png").exists()


# --- compare: clouds -------------------------------------------------------

def test_compare_clouds_end_to_end(tmp_path, capsys):
    a = _synth(tmp_path, "a", 1)
    b = _synth(tmp_path, "b", 2)
    out_dir = tmp_path / "cmp"
    code = main(["compare", str(a), str(b), "--format", "xyz-labeled-csv",
                 "--out-dir", str(out_dir), *FAST])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "entropy-distribution EMD" in stdout
    assert "signature SSIM" in stdout
    report = json.loads((out_dir / "report.json").read_text())
    for v in report["metrics"].values():
        assert v is not None
    assert (out_dir / "report.png").exists()


def test_compare_identical_inputs(tmp_path):
    a = _synth(tmp_path, "a", 1)
    out_dir = tmp_path / "cmp"
    code = main(["compare", str(a), str(a), "--format", "xyz-labeled-csv",
                 "--out-dir", str(out_dir), "--no-figure", *FAST])
    assert code == 0
    m = json.loads((out_dir / "report.json").read_text())["metrics"]
    assert m["s_ssim"] == 1.0
    assert m["d_emd_info"] == 0.0
    assert m["d_bd_img"] == 0.0
    assert m["kl_sym_class"] == 0.0
    assert not (out_dir / "report.png").exists()


# --- compare: counts -------------------------------------------------------

def test_compare_counts(tmp_path, capsys):
    p = tmp_path / "p.csv"
    q = tmp_path / "q.csv"
    p.write_text("tree,10\nbuilding,30\nroad,60\n")
    q.write_text("tree,20\nbuilding,20\nroad,60\n")
    out_dir = tmp_path / "cmp"
    code = main(["compare", str(p), str(q), "--counts", "--out-dir", str(out_dir)])
    assert code == 0
    m = json.loads((out_dir / "report.json").read_text())["metrics"]
    names = ("tree", "building", "low_veg", "road")
    hp = Histogram.from_class_counts((10, 30, 0, 60), names)
    hq = Histogram.from_class_counts((20, 20, 0, 60), names)
    assert m["l1_class"] == class_l1(hp, hq)
    assert m["kl_sym_class"] == class_kl_sym(hp, hq)
    assert m["s_ssim"] is None
    assert "n/a" in capsys.readouterr().out


# --- compare: signatures ---------------------------------------------------

def _render_signatures(tmp_path, seeds):
    dirs = []
    for i, seed in enumerate(seeds):
        f = _synth(tmp_path, f"s{i}", seed)
        d = tmp_path / f"sig{i}"
        assert main(["signature", str(f), "--format", "xyz-labeled-csv",
                     "--out-dir", str(d), *FAST]) == 0
        dirs.append(d)
    return dirs

def test_compare_signature_files(tmp_path):
    d0, d1 = _render_signatures(tmp_path, (1, 2))
    out_dir = tmp_path / "cmp"
    code = main(["compare", str(d0 / "s0_gm.png"), str(d1 / "s1_gm.png"),
                 "--signatures", "--out-dir", str(out_dir)])
    assert code == 0
    m = json.loads((out_dir / "report.json").read_text())["metrics"]
    assert 0.0 < m["s_ssim"] < 1.0
    assert m["d_bd_img"] is None

    code = main(["compare", str(d0 / "s0_agsm.png"), str(d1 / "s1_agsm.png"),
                 "--signatures", "--out-dir", str(out_dir)])
    assert code == 0
    m = json.loads((out_dir / "report.json").read_text())["metrics"]
    assert m["d_bd_img"] is not None and m["d_emd_img"] is not None
    assert m["s_ssim"] is None


def test_compare_signatures_incompatible_resolution(tmp_path, capsys):
    f = _synth(tmp_path, "s", 1)
    for res, d in (("64", "d64"), ("128", "d128")):
        assert main(["signature", str(f), "--format", "xyz-labeled-csv",
                     "--out-dir", str(tmp_path / d), "--kmin", "8",
                     "--resolution", res, "--threads", "1"]) == 0
    code = main(["compare", str(tmp_path / "d64" / "s_gm.png"),
                 str(tmp_path / "d128" / "s_gm.png"),
                 "--signatures", "--out-dir", str(tmp_path / "cmp")])
    assert code == 1
    assert "incompatible signatures" in capsys.readouterr().err


def test_compare_counts_and_signatures_conflict(tmp_path, capsys):
    p = tmp_path / "p.csv"
    p.write_text("tree,1\n")
    code = main(["compare", str(p), str(p), "--counts", "--signatures",
                 "--out-dir", str(tmp_path / "cmp")])
    assert code == 1
    assert "mutually exclusive" in capsys.readouterr().err


# --- downsample ------------------------------------------------------------

def test_downsample_roundtrip(tmp_path, cloud_file, capsys):
    out = tmp_path / "half.csv"
    code = main(["downsample", str(cloud_file), "--format", "xyz-labeled-csv",
                 "--fraction", "0.5", "--seed", "3", "--output", str(out)])
    assert code == 0
    kept = len(out.read_text().splitlines())
    assert 100 < kept < 200
    assert f"({kept} of 300 points)" in capsys.readouterr().out


def test_downsample_bad_fraction(tmp_path, cloud_file, capsys):
    code = main(["downsample", str(cloud_file), "--format", "xyz-labeled-csv",
                 "--fraction", "1.5", "--seed", "3",
                 "--output", str(tmp_path / "x.csv")])
    assert code == 1
    assert "fraction" in capsys.readouterr().err


# --- exit codes ------------------------------------------------------------

def test_exit_code_missing_file(tmp_path, capsys):
    code = main(["compute", str(tmp_path / "nope.csv"),
                 "--out-dir", str(tmp_path), *FAST])
    assert code == 2
    assert "i/o error" in capsys.readouterr().err


def test_exit_code_conflicting_ranges(tmp_path, cloud_file, capsys):
    code = main(["compute", str(cloud_file), "--format", "xyz-labeled-csv",
                 "--out-dir", str(tmp_path), "--kmin", "8", "--rmin", "0.1"])
    assert code == 1
    assert "not both" in capsys.readouterr().err


def test_exit_code_k_exceeds_cloud(tmp_path, cloud_file, capsys):
    code = main(["compute", str(cloud_file), "--format", "xyz-labeled-csv",
                 "--out-dir", str(tmp_path), "--kmin", "1000", "--threads", "1"])
    assert code == 1
    assert "insufficient points" in capsys.readouterr().err


def test_exit_code_usage_errors(capsys):
    assert main(["--help"]) == 0
    assert main(["unknown-command"]) == 1
    assert main([]) == 1
    capsys.readouterr()

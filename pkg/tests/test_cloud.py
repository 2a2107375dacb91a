import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudsig import (
    ParseError,
    PointCloud,
    ScaleRecord,
    SemanticScheme,
    ValidationError,
    VocabularyError,
    class_distribution,
    downsample_uniform,
    load_class_counts,
    load_cloud,
    normalize,
    parse_scheme,
    save_cloud,
)
from cloudsig.cloud import format_scheme


def test_pointcloud_validation():
    with pytest.raises(ValidationError):
        PointCloud(np.zeros((3, 2)))
    with pytest.raises(ValidationError):
        PointCloud(np.array([[0.0, 0.0, np.nan]]))
    with pytest.raises(ValidationError):
        PointCloud(np.array([[0.0, 0.0, np.inf]]))
    with pytest.raises(ValidationError):
        PointCloud(np.zeros((4, 3)), labels=np.zeros(3, dtype=np.int64))


def test_pointcloud_immutable(box_cloud):
    with pytest.raises(ValueError):
        box_cloud.points[0, 0] = 99.0


def test_load_cloud_basic(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("# header comment\n1.5,2,3\n\n4,5,6.25\n")
    c = load_cloud(p)
    assert c.n == 2
    assert not c.has_labels
    np.testing.assert_array_equal(c.points, [[1.5, 2, 3], [4, 5, 6.25]])


def test_load_cloud_bad_arity_line_number(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("1,2,3\n4,5\n")
    with pytest.raises(ParseError) as e:
        load_cloud(p)
    assert ":2:" in str(e.value)


def test_load_cloud_bad_number_line_number(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("1,2,3\n# fine\n4,five,6\n")
    with pytest.raises(ParseError) as e:
        load_cloud(p)
    assert ":3:" in str(e.value)
    assert "five" in str(e.value)


def test_load_cloud_empty(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("# nothing here\n")
    with pytest.raises(ParseError):
        load_cloud(p)


def test_load_labeled_cloud(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("0,0,0,0\n1,1,1,3\n")
    c = load_cloud(p, format="xyz-labeled-csv")
    assert c.has_labels
    np.testing.assert_array_equal(c.labels, [0, 3])


def test_load_labeled_rejects_fractional_label(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("0,0,0,1.5\n")
    with pytest.raises(ParseError):
        load_cloud(p, format="xyz-labeled-csv")


def test_load_labeled_rejects_out_of_scheme(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("0,0,0,7\n")
    with pytest.raises(VocabularyError):
        load_cloud(p, format="xyz-labeled-csv")


def test_load_cloud_unknown_format(tmp_path):
    with pytest.raises(ValidationError):
        load_cloud(tmp_path / "x.csv", format="las")


def test_save_load_roundtrip_exact(tmp_path, labeled_cloud):
    p = tmp_path / "c.csv"
    save_cloud(labeled_cloud, p)
    back = load_cloud(p, format="xyz-labeled-csv")
    np.testing.assert_array_equal(back.points, labeled_cloud.points)
    np.testing.assert_array_equal(back.labels, labeled_cloud.labels)


def test_scheme_default():
    s = SemanticScheme.default()
    assert s.n_classes == 4
    assert s.classes[0] == "tree"
    assert s.rgb_table().shape == (4, 3)
    assert s.rgb_table().dtype == np.uint8
    assert s.index_of("road") == 3
    with pytest.raises(VocabularyError):
        s.index_of("water")


def test_scheme_parse_roundtrip(tmp_path):
    s = SemanticScheme.default()
    p = tmp_path / "classes"
    p.write_text(format_scheme(s))
    back = parse_scheme(p)
    assert back == s


def test_scheme_parse_errors(tmp_path):
    p = tmp_path / "classes"
    p.write_text('0 = "a", color = "#102030"\n2 = "b", color = "#405060"\n')
    with pytest.raises(ParseError):
        parse_scheme(p)  # ids not dense
    p.write_text('0 = "a", color = "#102030"\n1 = "a", color = "#405060"\n')
    with pytest.raises((ParseError, ValidationError)):
        parse_scheme(p)  # duplicate name
    p.write_text('0 = "a", color = "#10203"\n')
    with pytest.raises(ParseError):
        parse_scheme(p)  # short color


def test_normalize_geometry():
    pts = np.array([[0.0, 0, 0], [10.0, 2, 1], [5.0, 1, 0.5]])
    c = PointCloud(pts)
    nc, rec = normalize(c)
    lo, hi = nc.bbox()
    # longest axis spans exactly [-1, 1], centered
    assert lo[0] == -1.0 and hi[0] == 1.0
    assert rec.meters_per_unit == 5.0
    np.testing.assert_allclose(lo + hi, 0.0, atol=1e-15)
    # uniform scale preserves aspect
    np.testing.assert_allclose(hi[1], 0.2, atol=1e-15)
    assert rec.bbox_min == (0.0, 0.0, 0.0)
    assert rec.radius_to_meters(0.01) == 0.05


def test_normalize_idempotent(box_cloud):
    n1, _ = normalize(box_cloud)
    n2, rec2 = normalize(n1)
    np.testing.assert_allclose(n2.points, n1.points, atol=1e-12)
    assert abs(rec2.meters_per_unit - 1.0) < 1e-12


def test_normalize_degenerate():
    with pytest.raises(ValidationError):
        normalize(PointCloud(np.zeros((5, 3))))


def test_normalize_keeps_labels(labeled_cloud):
    nc, _ = normalize(labeled_cloud)
    np.testing.assert_array_equal(nc.labels, labeled_cloud.labels)


def test_scale_record_seed_in_dict():
    rec = ScaleRecord(2.0, (0, 0, 0), (4, 2, 1), seed=5)
    d = rec.to_dict()
    assert d["seed"] == 5
    assert d["meters_per_unit"] == 2.0


def test_downsample_nested():
    g = np.random.default_rng(3)
    c = PointCloud(g.uniform(0, 1, (5000, 3)))
    d60 = downsample_uniform(c, 0.6, seed=11)
    d40 = downsample_uniform(c, 0.4, seed=11)
    # same seed: the 40% keep-set is a subset of the 60% keep-set
    set60 = {tuple(p) for p in d60.points}
    assert all(tuple(p) in set60 for p in d40.points)


def test_downsample_fraction_binomial():
    g = np.random.default_rng(4)
    c = PointCloud(g.uniform(0, 1, (20000, 3)))
    kept = downsample_uniform(c, 0.5, seed=9).n
    # 5 sigma of Binomial(20000, 0.5)
    assert abs(kept - 10000) < 5 * np.sqrt(20000 * 0.25)


def test_downsample_validation(box_cloud):
    with pytest.raises(ValidationError):
        downsample_uniform(box_cloud, 0.0, seed=0)
    with pytest.raises(ValidationError):
        downsample_uniform(box_cloud, 1.5, seed=0)


@settings(deadline=None, max_examples=25)
@given(frac=st.floats(0.2, 1.0), seed=st.integers(0, 2**16))
def test_downsample_keeps_label_pairing(frac, seed):
    g = np.random.default_rng(77)
    pts = g.uniform(0, 1, (400, 3))
    labels = (pts[:, 0] > 0.5).astype(np.int64)  # label derivable from point
    c = PointCloud(pts, labels)
    d = downsample_uniform(c, frac, seed=seed)
    np.testing.assert_array_equal(d.labels, (d.points[:, 0] > 0.5).astype(np.int64))


def test_class_distribution(labeled_cloud):
    h = class_distribution(labeled_cloud)
    assert h.masses.sum() == pytest.approx(1.0, abs=1e-12)
    counts = np.bincount(labeled_cloud.labels, minlength=4)
    np.testing.assert_allclose(h.masses, counts / counts.sum())
    assert h.names == SemanticScheme.default().classes


def test_class_distribution_needs_labels(box_cloud):
    with pytest.raises(ValidationError):
        class_distribution(box_cloud)


def test_load_class_counts(tmp_path):
    p = tmp_path / "counts.csv"
    p.write_text("# area totals\ntree, 30\nroad, 10\n")
    h = load_class_counts(p)
    np.testing.assert_allclose(h.masses, [0.75, 0.0, 0.0, 0.25])


def test_load_class_counts_duplicate(tmp_path):
    p = tmp_path / "counts.csv"
    p.write_text("tree,30\ntree,10\n")
    with pytest.raises(ParseError):
        load_class_counts(p)


def test_load_class_counts_unknown_name(tmp_path):
    p = tmp_path / "counts.csv"
    p.write_text("water,30\n")
    with pytest.raises(VocabularyError):
        load_class_counts(p)

"""Command-line front end.

Subcommands: compute (per-point geometry CSV), signature (PNG + sidecar),
compare (two clouds, or --counts / --signatures inputs), downsample, and
synth (test scenes). Exit codes: 0 ok, 1 validation or configuration,
2 I/O, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

from .cloud import (
    SemanticScheme,
    downsample_uniform,
    format_scheme,
    load_class_counts,
    load_cloud,
    parse_scheme,
    save_cloud,
)
from .errors import CloudSigError, ValidationError
from .metrics import ComparisonReport, class_kl_sym, class_l1, d_bd_img, d_emd_img, ssim
from .multiscale import ScaleRange
from .pipeline import RunConfig, atomic_write_text, compare_clouds, process_cloud, write_outputs
from .signature import load_signature
from .synth import SCENES, make_scene, scene_scheme

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERNAL = 3


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--descriptor", default="cov",
                   choices=["cov", "vote_raw", "vote_diffused", "vote_get"])
    p.add_argument("--mode", default="multiscale", choices=["multiscale", "optimal"])
    p.add_argument("--kmin", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--kstep", type=int, default=1)
    p.add_argument("--rmin", type=float)
    p.add_argument("--rmax", type=float)
    p.add_argument("--rstep", type=float, default=0.001)
    p.add_argument("--resolution", type=int, default=512)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=-1,
                   help="worker threads for neighbor queries (-1: all cores)")
    p.add_argument("--classes", help="class scheme file (default: built-in 4 classes)")


def _add_input_flags(p: argparse.ArgumentParser):
    p.add_argument("--format", default="xyz-csv",
                   choices=["xyz-csv", "xyz-labeled-csv"])
    p.add_argument("--out-dir", default=".")
    p.add_argument("--name", help="output stem (default: input basename)")


def _range_from_args(args) -> ScaleRange | None:
    has_k = args.kmin is not None or args.kmax is not None
    has_r = args.rmin is not None or args.rmax is not None
    if has_k and has_r:
        raise ValidationError("give either k-flags or r-flags, not both")
    if has_k:
        kmin = args.kmin if args.kmin is not None else args.kmax
        kmax = args.kmax if args.kmax is not None else kmin
        return ScaleRange.knn(kmin, kmax, args.kstep)
    if has_r:
        rmin = args.rmin if args.rmin is not None else args.rmax
        rmax = args.rmax if args.rmax is not None else rmin
        return ScaleRange.spherical(rmin, rmax, args.rstep)
    return None  # the mode's default range


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        descriptor=args.descriptor,
        mode=args.mode,
        srange=_range_from_args(args),
        resolution=args.resolution,
        bins=args.bins,
        seed=args.seed,
        threads=args.threads,
    )


def _scheme_from_args(args) -> SemanticScheme:
    if getattr(args, "classes", None):
        return parse_scheme(args.classes)
    return SemanticScheme.default()


def _load_input(args, scheme) -> object:
    name = args.name or os.path.splitext(os.path.basename(args.input))[0]
    return load_cloud(args.input, args.format, scheme, name=name)


def cmd_compute(args) -> int:
    scheme = _scheme_from_args(args)
    cloud = _load_input(args, scheme)
    result = process_cloud(cloud, _config_from_args(args), scheme)
    outputs = write_outputs(result, args.out_dir, cloud.name, with_signatures=False)
    print(f"wrote {outputs['geometry_csv']}")
    print(f"wrote {outputs['manifest']}")
    return EXIT_OK


def cmd_signature(args) -> int:
    scheme = _scheme_from_args(args)
    cloud = _load_input(args, scheme)
    result = process_cloud(cloud, _config_from_args(args), scheme)
    if result.sig_ag is None:
        print("warning: no labels, skipping the augmented signature", file=sys.stderr)
    outputs = write_outputs(result, args.out_dir, cloud.name, with_signatures=True)
    for key in ("signature_gm", "signature_agsm", "geometry_csv", "manifest"):
        if key in outputs:
            print(f"wrote {outputs[key]}")
    return EXIT_OK


def _empty_report(**kwargs) -> ComparisonReport:
    base = dict(d_emd_info=None, s_ssim=None, d_bd_img=None,
                d_emd_img=None, l1_class=None, kl_sym_class=None)
    base.update(kwargs)
    return ComparisonReport(**base)


def _compare_counts(args, scheme) -> ComparisonReport:
    p = load_class_counts(args.inputs[0], scheme)
    q = load_class_counts(args.inputs[1], scheme)
    return _empty_report(
        l1_class=class_l1(p, q),
        kl_sym_class=class_kl_sym(p, q),
        provenance={
            "mode": "counts",
            "input_p": args.inputs[0],
            "input_q": args.inputs[1],
        },
    )


def _compare_signatures(args) -> ComparisonReport:
    sig_p = load_signature(args.inputs[0])
    sig_q = load_signature(args.inputs[1])
    for key in ("descriptor", "mode", "resolution", "triangle_vertices"):
        if sig_p.meta.get(key) != sig_q.meta.get(key):
            raise ValidationError(
                f"incompatible signatures: {key} differs "
                f"({sig_p.meta.get(key)!r} vs {sig_q.meta.get(key)!r})"
            )
    if sig_p.is_rgb != sig_q.is_rgb:
        raise ValidationError("incompatible signatures: mixed grayscale and RGB")
    prov = {
        "mode": "signatures",
        "input_p": args.inputs[0],
        "input_q": args.inputs[1],
    }
    if sig_p.is_rgb:
        return _empty_report(
            d_bd_img=d_bd_img(sig_p, sig_q, args.bins),
            d_emd_img=d_emd_img(sig_p, sig_q, args.bins),
            provenance=prov,
        )
    return _empty_report(s_ssim=ssim(sig_p, sig_q), provenance=prov)


def cmd_compare(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    figure_path = None
    if args.counts and args.signatures:
        raise ValidationError("--counts and --signatures are mutually exclusive")
    if args.counts:
        report = _compare_counts(args, _scheme_from_args(args))
    elif args.signatures:
        report = _compare_signatures(args)
    else:
        scheme = _scheme_from_args(args)
        name_p = os.path.splitext(os.path.basename(args.inputs[0]))[0]
        name_q = os.path.splitext(os.path.basename(args.inputs[1]))[0]
        if name_p == name_q:
            name_q += "-q"
        cloud_p = load_cloud(args.inputs[0], args.format, scheme, name=name_p)
        cloud_q = load_cloud(args.inputs[1], args.format, scheme, name=name_q)
        result = compare_clouds(cloud_p, cloud_q, _config_from_args(args), scheme=scheme)
        report = result.report
        if not args.no_figure:
            from .report import render_comparison_figure

            figure_path = os.path.join(args.out_dir, "report.png")
            render_comparison_figure(result, figure_path)

    report_path = os.path.join(args.out_dir, "report.json")
    atomic_write_text(report.to_json(), report_path)
    print(report.to_table())
    print(f"\nwrote {report_path}")
    if figure_path:
        print(f"wrote {figure_path}")
    return EXIT_OK


def cmd_downsample(args) -> int:
    scheme = _scheme_from_args(args)
    cloud = load_cloud(args.input, args.format, scheme)
    out = downsample_uniform(cloud, args.fraction, args.seed)
    save_cloud(out, args.output)
    print(f"wrote {args.output} ({out.n} of {cloud.n} points)")
    return EXIT_OK


def cmd_synth(args) -> int:
    made = make_scene(args.scene, args.n, args.noise, args.seed)
    scheme = scene_scheme()
    pair = made if isinstance(made, tuple) else (made,)
    base, ext = os.path.splitext(args.out)
    paths = [args.out] if len(pair) == 1 else [f"{base}_before{ext}", f"{base}_after{ext}"]
    for cloud, path in zip(pair, paths):
        save_cloud(cloud, path)
        print(f"wrote {path} ({cloud.n} points)")
    scheme_path = base + ".classes"
    atomic_write_text(format_scheme(scheme), scheme_path)
    print(f"wrote {scheme_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cloudsig",
        description="Orientation-free geometric signatures for 3D point clouds",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="per-point saliency and entropy CSV")
    p.add_argument("input")
    _add_input_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("signature", help="render signature images")
    p.add_argument("input")
    _add_input_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_signature)

    p = sub.add_parser("compare", help="compare two clouds (or counts/signature files)")
    p.add_argument("inputs", nargs=2, metavar="INPUT")
    p.add_argument("--counts", action="store_true",
                   help="inputs are class-count CSV files (name,count rows)")
    p.add_argument("--signatures", action="store_true",
                   help="inputs are saved signature PNGs with sidecars")
    p.add_argument("--no-figure", action="store_true",
                   help="skip the report figure PNG")
    _add_input_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("downsample", help="seeded uniform thinning")
    p.add_argument("input")
    p.add_argument("--format", default="xyz-csv",
                   choices=["xyz-csv", "xyz-labeled-csv"])
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--classes")
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("synth", help="generate a synthetic labeled scene")
    p.add_argument("--scene", required=True, choices=list(SCENES))
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors and --help
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return args.func(args)
    except CloudSigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        name = getattr(exc, "filename", None)
        where = f" ({name})" if name else ""
        print(f"i/o error: {exc}{where}", file=sys.stderr)
        return EXIT_IO
    except Exception:
        print("internal error:", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

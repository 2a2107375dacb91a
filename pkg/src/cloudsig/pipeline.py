"""End-to-end runs: normalize, index, sweep scales, render, compare.

A RunConfig pins everything that affects output values; its hash goes
into every manifest and report so outputs are traceable to the exact
configuration that produced them.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .cloud import PointCloud, SemanticScheme, class_distribution, normalize
from .errors import ValidationError
from .index import build_index
from .metrics import (
    ComparisonReport,
    class_kl_sym,
    class_l1,
    d_bd_img,
    d_emd_img,
    d_emd_info,
    entropy_histogram,
    ssim,
)
from .multiscale import CloudGeometry, ScaleRange, run_mode, write_geometry_csv
from .signature import ReferenceTriangle, render_augmented, render_geometric

DESCRIPTORS = ("cov", "vote_raw", "vote_diffused", "vote_get")
MODES = ("multiscale", "optimal")


@dataclass(frozen=True)
class RunConfig:
    descriptor: str = "cov"
    mode: str = "multiscale"
    srange: Optional[ScaleRange] = None  # None: the mode's default range
    resolution: int = 512
    bins: int = 64
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.descriptor not in DESCRIPTORS:
            raise ValidationError(
                f"unknown descriptor {self.descriptor!r}, expected one of {DESCRIPTORS}"
            )
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.resolution < 8:
            raise ValidationError("resolution must be at least 8")
        if self.bins < 1:
            raise ValidationError("bins must be positive")
        if self.threads == 0:
            raise ValidationError("threads must be nonzero (-1 means all cores)")

    def resolved_range(self) -> ScaleRange:
        if self.srange is not None:
            return self.srange
        if self.mode == "multiscale":
            return ScaleRange.default_spherical()
        return ScaleRange.default_knn()

    def is_anomalous_combo(self) -> bool:
        return self.descriptor in ("vote_raw", "vote_diffused") and self.mode == "optimal"

    def config_dict(self) -> dict:
        r = self.resolved_range()
        return {
            "descriptor": self.descriptor,
            "mode": self.mode,
            "scale_kind": r.kind,
            "scales": list(r.values),
            "resolution": self.resolution,
            "bins": self.bins,
            "seed": self.seed,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.config_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def values_equal(self, other: "RunConfig") -> bool:
        # threads deliberately excluded: results are thread-count independent
        return self.config_dict() == other.config_dict()


@dataclass
class ProcessResult:
    cloud: PointCloud          # normalized
    geometry: CloudGeometry
    scale_record: object
    sig_gm: object
    sig_ag: object             # None when unlabeled
    config: RunConfig


def _signature_meta(config: RunConfig, cloud_name: str) -> dict:
    return {
        "descriptor": config.descriptor,
        "mode": config.mode,
        "cloud": cloud_name,
        "seed": config.seed,
        "scale_kind": config.resolved_range().kind,
        "scales": list(config.resolved_range().values),
    }


def process_cloud(cloud: PointCloud, config: RunConfig,
                  scheme: Optional[SemanticScheme] = None,
                  warn_stream=None) -> ProcessResult:
    """Normalize, sweep, and render one cloud under a config."""
    if warn_stream is None:
        warn_stream = sys.stderr
    if config.is_anomalous_combo():
        print(
            f"warning: descriptor {config.descriptor!r} with optimal-scale "
            "selection is known to behave erratically; proceeding",
            file=warn_stream,
        )
    normed, rec = normalize(cloud, seed=config.seed)
    index = build_index(normed)
    geometry = run_mode(
        normed, index, config.descriptor, config.mode,
        config.resolved_range(), workers=config.threads,
    )
    tri = ReferenceTriangle.for_resolution(config.resolution)
    meta = _signature_meta(config, cloud.name)
    sig_gm = render_geometric(geometry, tri, config.resolution, meta=meta)
    sig_ag = None
    if normed.has_labels:
        if scheme is None:
            scheme = SemanticScheme.default()
        sig_ag = render_augmented(
            geometry, normed.labels, scheme, tri, config.resolution, meta=meta
        )
    return ProcessResult(normed, geometry, rec, sig_gm, sig_ag, config)


def build_manifest(result: ProcessResult, outputs: Optional[dict] = None) -> dict:
    return {
        "tool": {"name": "cloudsig", "version": __version__},
        "config": result.config.config_dict(),
        "config_hash": result.config.config_hash(),
        "cloud": {
            "name": result.cloud.name,
            "n_points": result.cloud.n,
            "labeled": result.cloud.has_labels,
        },
        "scale_record": result.scale_record.to_dict(),
        "outputs": outputs or {},
    }


@dataclass
class ComparisonResult:
    report: ComparisonReport
    p: ProcessResult
    q: ProcessResult
    hist_p: object
    hist_q: object


def compare_clouds(cloud_p: PointCloud, cloud_q: PointCloud, config: RunConfig,
                   config_q: Optional[RunConfig] = None,
                   scheme: Optional[SemanticScheme] = None,
                   warn_stream=None) -> ComparisonResult:
    """Process both clouds and assemble the six-metric report.

    Semantic metrics need labels on both sides; otherwise they are None
    and a warning is printed.
    """
    if warn_stream is None:
        warn_stream = sys.stderr
    if config_q is not None and not config.values_equal(config_q):
        raise ValidationError(
            "incompatible configs: the two clouds must be processed with "
            "identical descriptor, mode, scales, resolution, bins, and seed"
        )
    rp = process_cloud(cloud_p, config, scheme, warn_stream)
    rq = process_cloud(cloud_q, config, scheme, warn_stream)

    hist_p = entropy_histogram(rp.geometry, config.bins)
    hist_q = entropy_histogram(rq.geometry, config.bins)
    emd_info = d_emd_info(rp.geometry, rq.geometry, config.bins)
    s = ssim(rp.sig_gm, rq.sig_gm)

    if rp.sig_ag is not None and rq.sig_ag is not None:
        bd = d_bd_img(rp.sig_ag, rq.sig_ag, config.bins)
        emd_img = d_emd_img(rp.sig_ag, rq.sig_ag, config.bins)
        dist_p = class_distribution(rp.cloud, scheme)
        dist_q = class_distribution(rq.cloud, scheme)
        l1 = class_l1(dist_p, dist_q)
        kl = class_kl_sym(dist_p, dist_q)
    else:
        print(
            "warning: semantic metrics skipped, both clouds must carry labels",
            file=warn_stream,
        )
        bd = emd_img = l1 = kl = None

    report = ComparisonReport(
        d_emd_info=emd_info,
        s_ssim=s,
        d_bd_img=bd,
        d_emd_img=emd_img,
        l1_class=l1,
        kl_sym_class=kl,
        provenance={
            "config": config.config_dict(),
            "config_hash": config.config_hash(),
            "cloud_p": {"name": rp.cloud.name, "n_points": rp.cloud.n},
            "cloud_q": {"name": rq.cloud.name, "n_points": rq.cloud.n},
            "scale_record_p": rp.scale_record.to_dict(),
            "scale_record_q": rq.scale_record.to_dict(),
        },
    )
    return ComparisonResult(report, rp, rq, hist_p, hist_q)


def atomic_write_text(text: str, path) -> None:
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(result: ProcessResult, out_dir, stem: str,
                  with_signatures: bool = False) -> dict:
    """Write geometry CSV, optional signatures, and the manifest.

    Returns {kind: path}. File writes are atomic (tmp + rename).
    """
    from .signature import save_signature

    os.makedirs(out_dir, exist_ok=True)
    outputs = {}
    geom_path = os.path.join(out_dir, f"{stem}_geometry.csv")
    tmp = geom_path + ".tmp"
    write_geometry_csv(result.geometry, tmp)
    os.replace(tmp, geom_path)
    outputs["geometry_csv"] = geom_path

    if with_signatures:
        gm_path = os.path.join(out_dir, f"{stem}_gm.png")
        save_signature(result.sig_gm, gm_path)
        outputs["signature_gm"] = gm_path
        if result.sig_ag is not None:
            ag_path = os.path.join(out_dir, f"{stem}_agsm.png")
            save_signature(result.sig_ag, ag_path)
            outputs["signature_agsm"] = ag_path

    manifest_path = os.path.join(out_dir, f"{stem}_manifest.json")
    # manifest lists siblings by basename so identical runs in different
    # directories stay byte-identical
    rel = {k: os.path.basename(p) for k, p in outputs.items()}
    manifest = build_manifest(result, rel)
    atomic_write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", manifest_path)
    outputs["manifest"] = manifest_path
    return outputs

"""Distances between clouds: entropy-distribution transport, masked image
similarity, color-histogram distances, and class-composition distances.

Everything here is a pure function of its inputs; compare() orchestrates
the full pipeline for two clouds and bundles the six metric values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import correlate1d

from .errors import BinningError, ShapeError, ValidationError, VocabularyError
from .multiscale import LN3

DEFAULT_BINS = 64


@dataclass(frozen=True)
class Histogram:
    """Normalized binned distribution with explicit edges.

    Class histograms carry the class names; the edges are then synthetic
    unit bins so transport-style metrics stay well-defined.
    """

    bin_edges: np.ndarray
    masses: np.ndarray
    names: Optional[tuple] = None

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        masses = np.asarray(self.masses, dtype=np.float64)
        if edges.ndim != 1 or masses.ndim != 1 or edges.size != masses.size + 1:
            raise BinningError("need len(edges) == len(masses) + 1")
        if not (np.diff(edges) > 0).all():
            raise BinningError("bin edges must be strictly ascending")
        if (masses < 0).any():
            raise BinningError("negative masses")
        if self.names is not None and len(self.names) != masses.size:
            raise BinningError("one name per bin required")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_counts(cls, counts, edges, names=None) -> "Histogram":
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise BinningError("histogram has no mass")
        return cls(np.asarray(edges, dtype=np.float64), counts / total, names)

    @classmethod
    def from_class_counts(cls, counts, names) -> "Histogram":
        k = len(names)
        return cls.from_counts(counts, np.arange(k + 1) - 0.5, tuple(names))

    @property
    def n_bins(self) -> int:
        return self.masses.size

    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def entropy_histogram(geometry, bins: int = DEFAULT_BINS) -> Histogram:
    """Normalized histogram of per-point entropies over [0, ln 3]."""
    if bins < 1:
        raise BinningError("need at least one bin")
    ent = geometry.entropy if hasattr(geometry, "entropy") else np.asarray(geometry)
    if ent.size == 0:
        raise ValidationError("no geometry points")
    ent = np.clip(ent, 0.0, LN3)  # fp overshoot must stay in the last bin
    counts, edges = np.histogram(ent, bins=bins, range=(0.0, LN3))
    return Histogram.from_counts(counts, edges)


def _check_same_edges(h1: Histogram, h2: Histogram):
    if h1.n_bins != h2.n_bins or not np.array_equal(h1.bin_edges, h2.bin_edges):
        raise BinningError("histograms have different bin layouts")


def emd_1d(h1: Histogram, h2: Histogram) -> float:
    """Earth mover's distance on a shared 1D binning.

    Ground distance is between bin centers; on a line this is the area
    between the two CDFs.
    """
    _check_same_edges(h1, h2)
    p = h1.masses / h1.masses.sum()
    q = h2.masses / h2.masses.sum()
    cdf_gap = np.cumsum(p - q)[:-1]
    spacing = np.diff(h1.centers())
    return float(np.abs(cdf_gap) @ spacing) if spacing.size else 0.0


def d_emd_info(geometry_p, geometry_q, bins: int = DEFAULT_BINS) -> float:
    """Transport distance between the two entropy distributions."""
    return emd_1d(entropy_histogram(geometry_p, bins), entropy_histogram(geometry_q, bins))


def _gaussian_kernel(radius: int = 5, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _gauss2d(img, kernel):
    tmp = correlate1d(img, kernel, axis=0, mode="reflect")
    return correlate1d(tmp, kernel, axis=1, mode="reflect")


def _as_gray_pair(a, b):
    for s in (a, b):
        if getattr(s, "image", None) is None or s.image.ndim != 2:
            raise ShapeError("grayscale signatures required")
    if a.image.shape != b.image.shape:
        raise ShapeError(f"resolution mismatch: {a.image.shape} vs {b.image.shape}")
    if not np.array_equal(a.mask, b.mask):
        raise ShapeError("signature masks differ")
    return a.image.astype(np.float64), b.image.astype(np.float64), a.mask


def ssim(sig_a, sig_b, data_range: float = 255.0) -> float:
    """Mean structural similarity over the triangle mask.

    11x11 Gaussian window (sigma 1.5), C1 = (0.01 L)^2, C2 = (0.03 L)^2.
    Identical images give exactly 1.
    """
    x, y, mask = _as_gray_pair(sig_a, sig_b)
    if not mask.any():
        raise ShapeError("empty mask")
    k = _gaussian_kernel()
    mx = _gauss2d(x, k)
    my = _gauss2d(y, k)
    mxx = _gauss2d(x * x, k)
    myy = _gauss2d(y * y, k)
    mxy = _gauss2d(x * y, k)
    vx = mxx - mx * mx
    vy = myy - my * my
    cxy = mxy - mx * my
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    num = (2.0 * mx * my + c1) * (2.0 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num[mask] / den[mask]))


def _masked_channels(sig):
    img = sig.image
    if img.ndim == 2:
        img = img[:, :, None]
    return img[sig.mask]  # (M, C)


def _check_image_pair(a, b):
    if a.image.shape != b.image.shape:
        raise ShapeError(f"resolution mismatch: {a.image.shape} vs {b.image.shape}")
    if not np.array_equal(a.mask, b.mask):
        raise ShapeError("signature masks differ")


def _channel_histograms(pix, bins):
    # (C, bins) counts over intensity [0, 256)
    out = np.empty((pix.shape[1], bins))
    for c in range(pix.shape[1]):
        out[c], _ = np.histogram(pix[:, c], bins=bins, range=(0.0, 256.0))
    return out


def d_bd_img(sig_a, sig_b, bins: int = DEFAULT_BINS) -> float:
    """Bhattacharyya distance between masked color histograms, in [0, 1].

    Per-channel histograms are concatenated and normalized jointly, so 0
    means every channel matches and 1 means disjoint support.
    """
    _check_image_pair(sig_a, sig_b)
    ha = _channel_histograms(_masked_channels(sig_a), bins).ravel()
    hb = _channel_histograms(_masked_channels(sig_b), bins).ravel()
    if ha.sum() <= 0 or hb.sum() <= 0:
        raise ShapeError("empty mask")
    p = ha / ha.sum()
    q = hb / hb.sum()
    # sqrt(1 - sum sqrt(pq)) via the Hellinger identity
    # 1 - sum sqrt(pq) = 0.5 sum (sqrt(p) - sqrt(q))^2, exact 0 for p == q
    gap = 0.5 * ((np.sqrt(p) - np.sqrt(q)) ** 2).sum()
    return float(np.sqrt(min(gap, 1.0)))


def d_emd_img(sig_a, sig_b, bins: int = DEFAULT_BINS) -> float:
    """Mean per-channel 1D EMD between masked intensity histograms.

    Ground distance is intensity (bin width 256/bins), so shifting one
    channel by k bins moves the metric by k * bin_width.
    """
    _check_image_pair(sig_a, sig_b)
    pa = _masked_channels(sig_a)
    pb = _masked_channels(sig_b)
    edges = np.linspace(0.0, 256.0, bins + 1)
    vals = []
    for c in range(pa.shape[1]):
        counts_a, _ = np.histogram(pa[:, c], bins=bins, range=(0.0, 256.0))
        counts_b, _ = np.histogram(pb[:, c], bins=bins, range=(0.0, 256.0))
        vals.append(
            emd_1d(Histogram.from_counts(counts_a, edges), Histogram.from_counts(counts_b, edges))
        )
    return float(np.mean(vals))


def _class_pair(p: Histogram, q: Histogram):
    if p.names is not None and q.names is not None:
        if tuple(p.names) != tuple(q.names):
            raise VocabularyError(f"class vocabularies differ: {p.names} vs {q.names}")
    elif p.n_bins != q.n_bins:
        raise VocabularyError("class histograms have different sizes")
    return p.masses / p.masses.sum(), q.masses / q.masses.sum()


def class_l1(p: Histogram, q: Histogram) -> float:
    """L1 distance between class fraction vectors, in [0, 2]."""
    pf, qf = _class_pair(p, q)
    return float(np.abs(pf - qf).sum())


KL_EPS = 1e-9


def class_kl_sym(p: Histogram, q: Histogram) -> float:
    """Symmetric Kullback-Leibler divergence sum (p-q) ln(p/q).

    Zero-mass classes are smoothed to 1e-9 inside the logarithm only.
    """
    pf, qf = _class_pair(p, q)
    ratio = np.log(np.maximum(pf, KL_EPS) / np.maximum(qf, KL_EPS))
    return float(((pf - qf) * ratio).sum())


@dataclass
class ComparisonReport:
    """The six distances plus run provenance. Semantic metrics are None
    when the inputs carry no labels."""

    d_emd_info: Optional[float]
    s_ssim: Optional[float]
    d_bd_img: Optional[float]
    d_emd_img: Optional[float]
    l1_class: Optional[float]
    kl_sym_class: Optional[float]
    provenance: dict = field(default_factory=dict)

    _LABELS = (
        ("d_emd_info", "entropy-distribution EMD"),
        ("s_ssim", "signature SSIM"),
        ("d_bd_img", "color Bhattacharyya"),
        ("d_emd_img", "color EMD"),
        ("l1_class", "class L1"),
        ("kl_sym_class", "class symmetric KL"),
    )

    def metrics_dict(self) -> dict:
        return {name: getattr(self, name) for name, _ in self._LABELS}

    def to_json(self) -> str:
        payload = {"metrics": self.metrics_dict(), "provenance": self.provenance}
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        rows = [f"{'metric':<24}{'value':>14}", "-" * 38]
        for name, label in self._LABELS:
            v = getattr(self, name)
            cell = "n/a" if v is None else f"{v:.6f}"
            rows.append(f"{label:<24}{cell:>14}")
        return "\n".join(rows)


def compare(cloud_p, cloud_q, config) -> ComparisonReport:
    """Full two-cloud comparison under one shared configuration."""
    from . import pipeline

    return pipeline.compare_clouds(cloud_p, cloud_q, config).report

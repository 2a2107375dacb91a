"""Scale sweeps: per-point saliency across a scale range, aggregated by
averaging or by entropy-minimizing scale selection.

The sweep is vectorized over points. For knn ranges all scales share one
k_max query; covariance tensors for every cut k fall out of prefix sums
over the distance-sorted neighbor lists, so a 10-scale sweep costs little
more than the largest single scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .descriptors import (
    DescriptorKind,
    diffuse_eigvals,
    eigvals_sym3,
    saliency_from_eigvals,
)
from .errors import NotSupportedError, ValidationError

LN3 = float(np.log(3.0))

_CHUNK = 8192


@dataclass(frozen=True)
class ScaleRange:
    """Discrete neighborhood scales: kind 'knn' (k values) or 'spherical' (radii)."""

    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in ("knn", "spherical"):
            raise ValidationError(f"unknown scale kind {self.kind!r}")
        if len(self.values) == 0:
            raise ValidationError("scale range is empty")
        if list(self.values) != sorted(self.values):
            raise ValidationError("scales must be ascending")
        if len(set(self.values)) != len(self.values):
            raise ValidationError("duplicate scales in range")
        if self.kind == "knn":
            for v in self.values:
                if int(v) != v or v < 3:
                    raise ValidationError(f"knn scale must be an integer >= 3, got {v}")
        else:
            for v in self.values:
                if not (v > 0):
                    raise ValidationError(f"radius must be > 0, got {v}")

    @classmethod
    def knn(cls, kmin: int, kmax: Optional[int] = None, kstep: int = 1) -> "ScaleRange":
        if kmax is None:
            kmax = kmin
        if kmin > kmax or kstep <= 0:
            raise ValidationError("need kmin <= kmax and kstep > 0")
        return cls("knn", tuple(range(int(kmin), int(kmax) + 1, int(kstep))))

    @classmethod
    def spherical(cls, rmin: float, rmax: Optional[float] = None,
                  rstep: float = 1.0) -> "ScaleRange":
        if rmax is None:
            return cls("spherical", (float(rmin),))
        if rmin > rmax or rstep <= 0:
            raise ValidationError("need rmin <= rmax and rstep > 0")
        vals = []
        r = float(rmin)
        while r <= rmax + 1e-12 * max(1.0, abs(rmax)):
            vals.append(round(r, 12))
            r += rstep
        return cls("spherical", tuple(vals))

    @classmethod
    def default_knn(cls) -> "ScaleRange":
        return cls.knn(10, 100, 10)

    @classmethod
    def default_spherical(cls) -> "ScaleRange":
        return cls.spherical(0.009, 0.011, 0.001)


@dataclass
class PointGeometry:
    """One point's aggregated geometric character."""

    saliency: np.ndarray
    entropy: float
    chosen_scale: object  # scale value, or the string "aggregated"
    degenerate: bool


class CloudGeometry:
    """Per-point saliency, entropy, and scale bookkeeping for a whole cloud.

    Behaves as a sequence of PointGeometry; bulk consumers read the array
    attributes directly.
    """

    def __init__(self, saliency, entropy, chosen_scale, degenerate, mode,
                 descriptor, srange):
        self.saliency = saliency
        self.entropy = entropy
        self.chosen_scale = chosen_scale  # float array, NaN means aggregated
        self.degenerate = degenerate
        self.mode = mode
        self.descriptor = descriptor
        self.srange = srange

    def __len__(self) -> int:
        return self.saliency.shape[0]

    def _scale_of(self, i: int):
        v = self.chosen_scale[i]
        if np.isnan(v):
            return "aggregated"
        return int(v) if self.srange.kind == "knn" else float(v)

    def __getitem__(self, i: int) -> PointGeometry:
        return PointGeometry(
            saliency=self.saliency[i],
            entropy=float(self.entropy[i]),
            chosen_scale=self._scale_of(i),
            degenerate=bool(self.degenerate[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def scale_used_string(self, i: int) -> str:
        v = self._scale_of(i)
        return v if isinstance(v, str) else repr(v)


def entropy_geom(s) -> float:
    """Shannon entropy of one saliency triple, nats, 0 ln 0 taken as 0."""
    return float(entropy_rows(np.asarray(s, dtype=np.float64).reshape(1, 3))[0])


def entropy_rows(sal) -> np.ndarray:
    c = np.clip(sal, 0.0, None)
    out = np.zeros(c.shape[:-1], dtype=np.float64)
    nz = c > 0.0
    logs = np.zeros_like(c)
    np.log(c, out=logs, where=nz)
    np.negative((c * logs).sum(axis=-1), out=out)
    # guard -0.0 so vertex entropies print as plain 0
    return out + 0.0


def _as_kind(descriptor) -> DescriptorKind:
    if isinstance(descriptor, DescriptorKind):
        kind = descriptor
    else:
        try:
            kind = DescriptorKind(str(descriptor))
        except ValueError:
            raise ValidationError(f"unknown descriptor {descriptor!r}") from None
    if kind == DescriptorKind.VOTE_GET:
        raise NotSupportedError("gradient-energy vote tensors are not supported")
    return kind


def scale_sweep(index, descriptor, srange: ScaleRange, workers: int = 1):
    """Saliency at every scale of the range for every indexed point.

    Returns (saliency (S, N, 3), degenerate (S, N)). Degenerate rows hold
    the point-type placeholder (0, 0, 1).
    """
    kind = _as_kind(descriptor)
    if srange.kind == "knn":
        if max(srange.values) > index.n:
            raise ValidationError(
                f"insufficient points: k={max(srange.values)} > N={index.n}"
            )
        if kind == DescriptorKind.COV:
            return _sweep_knn_cov(index, srange, workers)
        return _sweep_knn_vote(index, srange, kind, workers)
    if kind == DescriptorKind.COV:
        return _sweep_sph_cov(index, srange, workers)
    return _sweep_sph_vote(index, srange, kind, workers)


def _sweep_knn_cov(index, srange, workers):
    pts = index.points
    n = index.n
    ks = np.asarray(srange.values, dtype=np.int64)
    nscales = ks.size
    kmax = int(ks.max())
    _, idx = index.knn_all(kmax, workers)
    sal = np.empty((nscales, n, 3), dtype=np.float64)
    degen = np.zeros((nscales, n), dtype=bool)
    kcol = ks.astype(np.float64)[:, None]
    for s in range(0, n, _CHUNK):
        e = min(s + _CHUNK, n)
        nb = pts[idx[s:e]] - pts[s:e, None, :]
        c1 = np.cumsum(nb, axis=1)[:, ks - 1, :]  # (c, S, 3) neighbor sums
        outer = nb[:, :, :, None] * nb[:, :, None, :]
        c2 = np.cumsum(outer, axis=1)[:, ks - 1]  # (c, S, 3, 3) second moments
        mu = c1 / kcol[None, :, :]
        cov = c2 / kcol[None, :, :, None] - mu[..., :, None] * mu[..., None, :]
        vals = eigvals_sym3(cov)  # (c, S, 3)
        s_rows, d_rows = saliency_from_eigvals(vals)
        sal[:, s:e, :] = np.swapaxes(s_rows, 0, 1)
        degen[:, s:e] = d_rows.T
    return sal, degen


def _sweep_knn_vote(index, srange, kind, workers):
    pts = index.points
    n = index.n
    ks = list(srange.values)
    kmax = max(ks)
    dist, idx = index.knn_all(kmax, workers)
    sal = np.empty((len(ks), n, 3), dtype=np.float64)
    degen = np.zeros((len(ks), n), dtype=bool)
    for s in range(0, n, _CHUNK):
        e = min(s + _CHUNK, n)
        nb = pts[idx[s:e]] - pts[s:e, None, :]
        dch = dist[s:e]
        nonzero = dch > 0.0
        vdir = np.where(nonzero[..., None], nb / np.where(nonzero, dch, 1.0)[..., None], 0.0)
        for si, k in enumerate(ks):
            sigma = dch[:, k - 1]
            ok = sigma > 0.0
            sg = np.where(ok, sigma, 1.0)
            w = np.exp(-((dch[:, :k] / sg[:, None]) ** 2))
            w = np.where(nonzero[:, :k], w, 0.0)
            a = np.einsum("ck,cki,ckj->cij", w, vdir[:, :k], vdir[:, :k])
            wsum = w.sum(axis=1)
            # T = wsum I - A shares eigenvectors with A; reuse A's spectrum
            la = eigvals_sym3(a)
            vals = wsum[:, None] - la[:, ::-1]
            if kind == DescriptorKind.VOTE_DIFFUSED:
                vals = diffuse_eigvals(vals)
            rows, drows = saliency_from_eigvals(vals)
            bad = ~ok | (wsum <= 0.0)
            rows[bad] = (0.0, 0.0, 1.0)
            sal[si, s:e] = rows
            degen[si, s:e] = drows | bad
    return sal, degen


def _segment_cov(pts, centers_idx, lists):
    """Covariance per neighborhood from ragged index lists (query-relative)."""
    counts = np.fromiter((len(l) for l in lists), dtype=np.int64, count=len(lists))
    total = int(counts.sum())
    c = len(lists)
    seg = np.repeat(np.arange(c), counts)
    flat = np.concatenate(lists).astype(np.int64) if total else np.empty(0, np.int64)
    rel = pts[flat] - pts[centers_idx][seg]
    s1 = np.stack(
        [np.bincount(seg, weights=rel[:, j], minlength=c) for j in range(3)], axis=1
    )
    cov = np.empty((c, 3, 3), dtype=np.float64)
    for i in range(3):
        for j in range(i, 3):
            v = np.bincount(seg, weights=rel[:, i] * rel[:, j], minlength=c)
            cov[:, i, j] = v
            cov[:, j, i] = v
    nn = np.maximum(counts, 1).astype(np.float64)
    mu = s1 / nn[:, None]
    cov = cov / nn[:, None, None] - mu[:, :, None] * mu[:, None, :]
    return cov, counts


def _sweep_sph_cov(index, srange, workers):
    pts = index.points
    n = index.n
    centers = np.arange(n)
    sal = np.empty((len(srange.values), n, 3), dtype=np.float64)
    degen = np.zeros((len(srange.values), n), dtype=bool)
    for si, r in enumerate(srange.values):
        lists = index.radius_all(float(r), workers)
        cov, counts = _segment_cov(pts, centers, lists)
        small = counts < 3
        vals = eigvals_sym3(cov)
        rows, drows = saliency_from_eigvals(vals)
        rows[small] = (0.0, 0.0, 1.0)
        sal[si] = rows
        degen[si] = drows | small
    return sal, degen


def _sweep_sph_vote(index, srange, kind, workers):
    pts = index.points
    n = index.n
    sal = np.empty((len(srange.values), n, 3), dtype=np.float64)
    degen = np.zeros((len(srange.values), n), dtype=bool)
    for si, r in enumerate(srange.values):
        lists = index.radius_all(float(r), workers)
        counts = np.fromiter((len(l) for l in lists), dtype=np.int64, count=n)
        seg = np.repeat(np.arange(n), counts)
        flat = np.concatenate(lists).astype(np.int64) if counts.sum() else np.empty(0, np.int64)
        rel = pts[flat] - pts[seg]
        d = np.linalg.norm(rel, axis=1)
        voter = d > 0.0
        w = np.where(voter, np.exp(-((d / float(r)) ** 2)), 0.0)
        vdir = np.where(voter[:, None], rel / np.where(voter, d, 1.0)[:, None], 0.0)
        a = np.empty((n, 3, 3), dtype=np.float64)
        for i in range(3):
            for j in range(i, 3):
                v = np.bincount(seg, weights=w * vdir[:, i] * vdir[:, j], minlength=n)
                a[:, i, j] = v
                a[:, j, i] = v
        wsum = np.bincount(seg, weights=w, minlength=n)
        voters = np.bincount(seg[voter], minlength=n)
        la = eigvals_sym3(a)
        vals = wsum[:, None] - la[:, ::-1]
        if kind == DescriptorKind.VOTE_DIFFUSED:
            vals = diffuse_eigvals(vals)
        rows, drows = saliency_from_eigvals(vals)
        bad = (counts < 2) | (voters < 1)
        rows[bad] = (0.0, 0.0, 1.0)
        sal[si] = rows
        degen[si] = drows | bad
    return sal, degen


def aggregate_multiscale(cloud, index, descriptor, srange: ScaleRange,
                         workers: int = 1) -> CloudGeometry:
    """Arithmetic mean of per-scale saliency maps; entropy of the mean.

    Degenerate scales contribute their (0, 0, 1) placeholder to the mean
    and set the point's degenerate flag; no point ever aborts the sweep.
    """
    sal, degen = scale_sweep(index, descriptor, srange, workers)
    mean = sal.mean(axis=0)
    ent = entropy_rows(mean)
    chosen = np.full(mean.shape[0], np.nan)
    return CloudGeometry(
        mean, ent, chosen, degen.any(axis=0), "multiscale", _as_kind(descriptor), srange
    )


def optimal_scale(cloud, index, descriptor, srange: ScaleRange,
                  workers: int = 1) -> CloudGeometry:
    """Per point, the scale minimizing entropy; its saliency is kept.

    Ties break toward the smallest scale. Degenerate scales never win; a
    point degenerate everywhere keeps (0, 0, 1) with entropy 0, flagged,
    reporting the smallest scale.
    """
    sal, degen = scale_sweep(index, descriptor, srange, workers)
    ent = entropy_rows(sal)  # (S, N)
    ent_m = np.where(degen, np.inf, ent)
    best = np.argmin(ent_m, axis=0)  # first hit = smallest scale on ties
    n = sal.shape[1]
    rows = np.arange(n)
    out_sal = sal[best, rows]
    out_ent = ent_m[best, rows]
    all_degen = degen.all(axis=0)
    out_sal[all_degen] = (0.0, 0.0, 1.0)
    out_ent[all_degen] = 0.0
    scales = np.asarray(srange.values, dtype=np.float64)
    chosen = scales[best]
    chosen[all_degen] = scales[0]
    return CloudGeometry(
        out_sal, out_ent, chosen, all_degen, "optimal", _as_kind(descriptor), srange
    )


def run_mode(cloud, index, descriptor, mode: str, srange: ScaleRange,
             workers: int = 1) -> CloudGeometry:
    if mode == "multiscale":
        return aggregate_multiscale(cloud, index, descriptor, srange, workers)
    if mode == "optimal":
        return optimal_scale(cloud, index, descriptor, srange, workers)
    raise ValidationError(f"unknown mode {mode!r}")


GEOMETRY_CSV_HEADER = "index,C_l,C_s,C_p,E_geom,scale_used"


def write_geometry_csv(geom: CloudGeometry, path) -> None:
    """Per-point export: index,C_l,C_s,C_p,E_geom,scale_used.

    Floats are shortest round-trip reprs so reruns are byte-identical.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(GEOMETRY_CSV_HEADER + "\n")
        sal = geom.saliency
        ent = geom.entropy
        for i in range(len(geom)):
            cl, cs, cp = (float(v) for v in sal[i])
            fh.write(
                f"{i},{cl!r},{cs!r},{cp!r},"
                f"{float(ent[i])!r},{geom.scale_used_string(i)}\n"
            )

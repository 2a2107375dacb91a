"""Exact neighborhood queries (k nearest, fixed radius) over a point cloud.

Backed by scipy's compressed kd-tree. The wrapper owns the ordering
contract: results come back sorted by (distance, index), so equidistant
neighbors resolve to the lower index and repeated runs agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Neighborhood definition: kind 'knn' with k points, or 'spherical' with radius r."""

    kind: str
    scale: float

    def __post_init__(self):
        if self.kind == "knn":
            k = self.scale
            if int(k) != k or k < 3:
                raise ValidationError(f"knn scale must be an integer >= 3, got {k}")
        elif self.kind == "spherical":
            if not (self.scale > 0):
                raise ValidationError(f"spherical scale must be > 0, got {self.scale}")
        else:
            raise ValidationError(f"unknown neighborhood kind {self.kind!r}")


class SpatialIndex:
    """Immutable spatial index over one cloud; safe for concurrent queries."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValidationError("index needs a non-empty (N, 3) array")
        self._points = pts
        self._tree = cKDTree(pts)

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self._points

    def knn(self, query, k: int) -> np.ndarray:
        """Indices of the k nearest points, distance-ascending.

        Ties broken toward the lower point index. A query at a cloud point
        returns that point first (distance 0).
        """
        if k < 1:
            raise ValidationError("k must be >= 1")
        if k > self.n:
            raise ValidationError(f"insufficient points: k={k} > N={self.n}")
        q = np.asarray(query, dtype=np.float64)
        d, _ = self._tree.query(q, k=k)
        dk = float(np.max(d)) if k > 1 else float(d)
        # gather everything within the k-th distance, then cut after an
        # exact (distance, index) sort so boundary ties are deterministic;
        # pad the gather radius a few ulps so the tree's own distance
        # rounding cannot drop the k-th neighbor
        dk *= 1.0 + 4.0 * np.finfo(np.float64).eps
        cand = np.asarray(self._tree.query_ball_point(q, dk), dtype=np.int64)
        cd = np.linalg.norm(self._points[cand] - q, axis=1)
        order = np.lexsort((cand, cd))
        return cand[order[:k]]

    def radius(self, query, r: float) -> np.ndarray:
        """Indices of all points with distance <= r, sorted by (distance, index)."""
        if not (r > 0):
            raise ValidationError("radius must be > 0")
        q = np.asarray(query, dtype=np.float64)
        idx = np.asarray(self._tree.query_ball_point(q, r), dtype=np.int64)
        if idx.size == 0:
            return idx
        d = np.linalg.norm(self._points[idx] - q, axis=1)
        return idx[np.lexsort((idx, d))]

    def knn_all(self, k: int, workers: int = 1):
        """kNN of every cloud point at once: (distances, indices), each (N, k).

        Rows are (distance, index) sorted. Unlike knn(), exact ties at the
        k-th position keep whichever candidates the tree returned, so this
        is run-deterministic but may differ from the single-query tie rule
        when duplicate distances straddle the cut.
        """
        if k > self.n:
            raise ValidationError(f"insufficient points: k={k} > N={self.n}")
        d, i = self._tree.query(self._points, k=k, workers=workers)
        if k == 1:
            d = d[:, None]
            i = i[:, None]
        order = np.lexsort((i, d), axis=-1)
        return np.take_along_axis(d, order, axis=-1), np.take_along_axis(i, order, axis=-1)

    def radius_all(self, r: float, workers: int = 1):
        """Ball neighborhoods of every cloud point; list of index arrays.

        Membership only, no ordering guarantee (callers reduce by sums).
        """
        if not (r > 0):
            raise ValidationError("radius must be > 0")
        return self._tree.query_ball_point(self._points, r, workers=workers)


def build_index(cloud) -> SpatialIndex:
    """Index a PointCloud (or bare array)."""
    pts = cloud.points if hasattr(cloud, "points") else cloud
    return SpatialIndex(pts)

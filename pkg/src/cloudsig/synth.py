"""Synthetic labeled scenes for tests and demos.

Sizes are meters, matching real-input conventions; the pipeline
normalizes them like any other cloud. The plane is a long strip so the
default spherical radii still see a usable number of neighbors after
normalization shrinks the short axes.
"""

from __future__ import annotations

import numpy as np

from .cloud import PointCloud, SemanticScheme
from .errors import ValidationError

TREE, BUILDING, LOW_VEG, ROAD = 0, 1, 2, 3

SCENES = ("plane", "line", "blob", "mixed", "deforestation-pair")


def _rng(seed):
    return np.random.default_rng(seed)


def make_plane(n: int = 10000, noise: float = 0.1, seed: int = 0) -> PointCloud:
    """Strip 200 x 10 m in the xy plane, |z| <= noise, labeled road.

    Points sit on a near-square grid (scan-line style) so planarity is
    not drowned by sampling noise at small radii; only z is randomized.
    """
    g = _rng(seed)
    length, width = 200.0, 10.0
    # equal spacing on both axes, else the neighbor stencil of a small
    # ball is x/y asymmetric and leaks planarity into linearity
    a = np.sqrt(length * width / n)
    ny = max(1, round(width / a))
    nx = int(np.ceil(n / ny))
    xs = (np.arange(nx) + 0.5 - nx / 2.0) * a
    ys = (np.arange(ny) + 0.5 - ny / 2.0) * a
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack(
        [
            gx.ravel()[:n],
            gy.ravel()[:n],
            g.uniform(-noise, noise, n) if noise > 0 else np.zeros(n),
        ]
    )
    return PointCloud(pts, np.full(n, ROAD), "plane")


def make_line(n: int = 10000, noise: float = 0.1, seed: int = 0) -> PointCloud:
    """Segment of 200 m along x with transverse jitter <= noise, labeled building."""
    g = _rng(seed)
    jitter = (
        np.column_stack([g.uniform(-noise, noise, n), g.uniform(-noise, noise, n)])
        if noise > 0
        else np.zeros((n, 2))
    )
    pts = np.column_stack([g.uniform(-100.0, 100.0, n), jitter])
    return PointCloud(pts, np.full(n, BUILDING), "line")


def make_blob(n: int = 10000, noise: float = 0.1, seed: int = 0,
              sigma: float = 30.0) -> PointCloud:
    """Isotropic Gaussian ball (sigma 30 m), labeled tree; noise is unused
    (the blob is already volumetric)."""
    g = _rng(seed)
    pts = g.normal(0.0, sigma, (n, 3))
    return PointCloud(pts, np.full(n, TREE), "blob")


def make_mixed(n: int = 20000, noise: float = 0.3, seed: int = 0) -> PointCloud:
    """Disc plane + vertical line + two blobs, ball-like overall extent.

    Labels: disc road, line building, large blob tree, small blob
    low-vegetation. Good for scale sweeps with knn ranges.
    """
    g = _rng(seed)
    n_plane = int(0.35 * n)
    n_line = int(0.30 * n)
    n_tree = int(0.25 * n)
    n_lv = n - n_plane - n_line - n_tree

    # disc of radius 60 in the xy plane
    rad = 60.0 * np.sqrt(g.uniform(0.0, 1.0, n_plane))
    ang = g.uniform(0.0, 2.0 * np.pi, n_plane)
    plane = np.column_stack(
        [rad * np.cos(ang), rad * np.sin(ang), g.uniform(-noise, noise, n_plane)]
    )

    line = np.column_stack(
        [
            g.uniform(-noise, noise, n_line),
            g.uniform(-noise, noise, n_line),
            g.uniform(-60.0, 60.0, n_line),
        ]
    )

    tree = g.normal(0.0, 8.0, (n_tree, 3)) + np.array([25.0, 25.0, 30.0])
    low = g.normal(0.0, 5.0, (n_lv, 3)) + np.array([-30.0, -20.0, 10.0])

    pts = np.vstack([plane, line, tree, low])
    labels = np.concatenate(
        [
            np.full(n_plane, ROAD),
            np.full(n_line, BUILDING),
            np.full(n_tree, TREE),
            np.full(n_lv, LOW_VEG),
        ]
    )
    return PointCloud(pts, labels, "mixed")


def make_deforestation_pair(n: int = 20000, noise: float = 0.3, seed: int = 0):
    """(before, after): after is before minus every tree-labeled point."""
    before = make_mixed(n, noise, seed)
    keep = before.labels != TREE
    after = PointCloud(before.points[keep], before.labels[keep], "mixed-cleared")
    return before, after


def make_scene(scene: str, n: int = 10000, noise: float = 0.1, seed: int = 0):
    """Dispatch by scene name; deforestation-pair returns a 2-tuple."""
    if scene == "plane":
        return make_plane(n, noise, seed)
    if scene == "line":
        return make_line(n, noise, seed)
    if scene == "blob":
        return make_blob(n, noise, seed)
    if scene == "mixed":
        return make_mixed(n, noise, seed)
    if scene == "deforestation-pair":
        return make_deforestation_pair(n, noise, seed)
    raise ValidationError(f"unknown scene {scene!r}, expected one of {SCENES}")


def scene_scheme() -> SemanticScheme:
    return SemanticScheme.default()

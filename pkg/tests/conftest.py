"""Shared fixtures and independent oracles.

The oracles here deliberately take the dumb route (full pairwise
distances, dense linear programs) so the fast implementations have
something honest to disagree with.
"""

import numpy as np
import pytest
from scipy.optimize import linprog

from cloudsig import PointCloud, build_index


def brute_knn(pts, q, k):
    """k nearest by (distance, index); returns (distances, indices)."""
    d = np.linalg.norm(pts - np.asarray(q, dtype=np.float64), axis=1)
    order = np.lexsort((np.arange(len(pts)), d))[:k]
    return d[order], order


def brute_radius(pts, q, r):
    """All indices within r, sorted by (distance, index)."""
    d = np.linalg.norm(pts - np.asarray(q, dtype=np.float64), axis=1)
    hit = np.nonzero(d <= r)[0]
    order = np.lexsort((hit, d[hit]))
    return hit[order]


def emd_lp(h1, h2):
    """Transport distance via a dense linear program over bin centers."""
    p = h1.masses / h1.masses.sum()
    q = h2.masses / h2.masses.sum()
    c1, c2 = h1.centers(), h2.centers()
    n, m = len(p), len(q)
    cost = np.abs(c1[:, None] - c2[None, :]).ravel()
    rows = []
    for i in range(n):
        r = np.zeros((n, m))
        r[i, :] = 1.0
        rows.append(r.ravel())
    for j in range(m):
        r = np.zeros((n, m))
        r[:, j] = 1.0
        rows.append(r.ravel())
    res = linprog(cost, A_eq=np.array(rows), b_eq=np.concatenate([p, q]),
                  bounds=(0, None), method="highs")
    assert res.success, res.message
    return float(res.fun)


def random_psd(rng, n):
    """Stack of random PSD 3x3 matrices with a spread of conditioning."""
    a = rng.normal(size=(n, 3, 3))
    m = a @ np.swapaxes(a, 1, 2)
    # mix in some rank-deficient ones
    k = n // 10
    if k:
        b = rng.normal(size=(k, 3, 1))
        m[:k] = b @ np.swapaxes(b, 1, 2)
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def box_cloud():
    """300 uniform points in the unit box, no labels."""
    g = np.random.default_rng(7)
    return PointCloud(g.uniform(-1.0, 1.0, (300, 3)), None, "box")


@pytest.fixture
def box_index(box_cloud):
    return build_index(box_cloud)


@pytest.fixture
def labeled_cloud():
    g = np.random.default_rng(8)
    pts = g.uniform(-1.0, 1.0, (120, 3))
    labels = g.integers(0, 4, 120)
    return PointCloud(pts, labels, "labeled")


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance measurements past output capture."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "MEASURED", None) if mod else None
    if lines:
        terminalreporter.section("acceptance measurements")
        for line in lines:
            terminalreporter.write_line(line)

"""Local geometric descriptor tensors and saliency decomposition.

Per point and scale, a neighborhood is summarized by a symmetric PSD 3x3
tensor: the covariance of neighbor coordinates, or a sum of decayed ball
(plate) votes. Sorted eigenvalues l0 >= l1 >= l2 split into the saliency
triple

    C_l = S (l0 - l1),  C_s = 2 S (l1 - l2),  C_p = 3 S l2,
    S = 1 / (l0 + l1 + l2),

which partitions unity: line-, surface-, and point-type likelihoods.

Eigenvalues come from a closed-form trigonometric solver vectorized over
stacks of matrices; LAPACK is deliberately not on this path so tests can
use it as an independent reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NotSupportedError, ValidationError
from .index import NeighborhoodSpec

# the analytic solver is sqrt(eps)-accurate near repeated eigenvalues, so
# round-off negatives can reach a few 1e-8 * scale; beyond this they are
# construction bugs, not round-off
EIG_CLAMP = 1e-7


class DescriptorKind(Enum):
    COV = "cov"
    VOTE_RAW = "vote_raw"
    VOTE_DIFFUSED = "vote_diffused"
    VOTE_GET = "vote_get"  # declared variant, intentionally unimplemented


@dataclass
class DescriptorTensor:
    m: np.ndarray
    kind: DescriptorKind
    point_index: int = -1
    scale: float = 0.0


def _check_symmetric(m, tol=1e-9):
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValidationError(f"tensor must be 3x3, got {m.shape}")
    if not np.isfinite(m).all():
        raise ValidationError("tensor has non-finite entries")
    asym = np.abs(m - m.T).max()
    scale = max(1.0, np.abs(m).max())
    if asym > tol * scale:
        raise ValidationError(f"tensor not symmetric (asymmetry {asym:.3e})")
    return 0.5 * (m + m.T)


def eigvals_sym3(mats) -> np.ndarray:
    """Descending eigenvalues of a stack of symmetric 3x3 matrices.

    Closed-form trigonometric solution (characteristic cubic), shape
    (..., 3, 3) -> (..., 3). Exact symmetry is assumed, not checked.
    """
    a = np.asarray(mats, dtype=np.float64)
    a00 = a[..., 0, 0]
    a11 = a[..., 1, 1]
    a22 = a[..., 2, 2]
    a01 = a[..., 0, 1]
    a02 = a[..., 0, 2]
    a12 = a[..., 1, 2]

    q = (a00 + a11 + a22) / 3.0
    b00 = a00 - q
    b11 = a11 - q
    b22 = a22 - q
    p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * (a01 * a01 + a02 * a02 + a12 * a12)
    p = np.sqrt(p2 / 6.0)

    # det(B)/2 with B = (A - q I) / p, guarded where p == 0 (scalar matrix)
    safe = p > 0
    ps = np.where(safe, p, 1.0)
    c00 = b00 / ps
    c11 = b11 / ps
    c22 = b22 / ps
    c01 = a01 / ps
    c02 = a02 / ps
    c12 = a12 / ps
    detb = (
        c00 * (c11 * c22 - c12 * c12)
        - c01 * (c01 * c22 - c12 * c02)
        + c02 * (c01 * c12 - c11 * c02)
    )
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0

    e0 = q + 2.0 * p * np.cos(phi)
    e2 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e1 = 3.0 * q - e0 - e2
    out = np.stack([e0, e1, e2], axis=-1)
    return np.where(safe[..., None], out, np.stack([q, q, q], axis=-1))


def _eigvec_for(m, lam, tol):
    # null vector of (m - lam I) from the largest row cross product
    b = m - lam * np.eye(3)
    c0 = np.cross(b[0], b[1])
    c1 = np.cross(b[0], b[2])
    c2 = np.cross(b[1], b[2])
    cands = np.stack([c0, c1, c2])
    norms = np.linalg.norm(cands, axis=1)
    j = int(np.argmax(norms))
    if norms[j] <= tol:
        return None
    return cands[j] / norms[j]


def eigen_sym3(t):
    """Eigen-decomposition of one tensor: (descending values, column vectors).

    Accepts a DescriptorTensor or a bare 3x3 array. Values have tiny
    negatives clamped to zero; vectors satisfy ||m v - l v|| <= 1e-8 ||m||.
    """
    m = t.m if isinstance(t, DescriptorTensor) else t
    m = _check_symmetric(m)
    vals = eigvals_sym3(m)
    scale = max(1.0, float(np.abs(vals).max()))
    if vals.min() < -EIG_CLAMP * scale:
        raise ValidationError(f"tensor not PSD (eigenvalue {vals.min():.3e})")
    vals = np.maximum(vals, 0.0)

    tol = 1e-12 * scale * scale
    gap01 = vals[0] - vals[1]
    gap12 = vals[1] - vals[2]
    septol = 1e-8 * scale
    if gap01 <= septol and gap12 <= septol:
        vecs = np.eye(3)
    else:
        vecs = np.zeros((3, 3))
        if gap01 >= gap12:
            # l0 well separated: solve it directly, complete the pair orthogonally
            v0 = _eigvec_for(m, vals[0], tol)
            if v0 is not None:
                vecs[:, 0] = v0
                if gap12 > septol:
                    v2 = _eigvec_for(m, vals[2], tol)
                else:
                    v2 = None
                if v2 is None:
                    v2 = _orthonormal_to(v0)[1]
                v2 = v2 - v0 * (v0 @ v2)
                n = np.linalg.norm(v2)
                v2 = v2 / n if n > 0 else _orthonormal_to(v0)[0]
                vecs[:, 2] = v2
                vecs[:, 1] = np.cross(v2, v0)
            else:
                vecs = None
        else:
            v2 = _eigvec_for(m, vals[2], tol)
            if v2 is not None:
                vecs[:, 2] = v2
                if gap01 > septol:
                    v0 = _eigvec_for(m, vals[0], tol)
                else:
                    v0 = None
                if v0 is None:
                    v0 = _orthonormal_to(v2)[1]
                v0 = v0 - v2 * (v2 @ v0)
                n = np.linalg.norm(v0)
                v0 = v0 / n if n > 0 else _orthonormal_to(v2)[0]
                vecs[:, 0] = v0
                vecs[:, 1] = np.cross(v2, v0)
            else:
                vecs = None

    if vecs is None or _eig_residual(m, vals, vecs) > 1e-8 * scale:
        # pathological conditioning: defer to the library solver
        w, v = np.linalg.eigh(m)
        vals = np.maximum(w[::-1], 0.0)
        vecs = v[:, ::-1]
    return vals, vecs


def _orthonormal_to(v):
    a = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(v, a)
    u /= np.linalg.norm(u)
    return u, np.cross(v, u)


def _eig_residual(m, vals, vecs):
    return max(
        float(np.linalg.norm(m @ vecs[:, i] - vals[i] * vecs[:, i])) for i in range(3)
    )


def saliency_from_eigvals(vals) -> tuple:
    """(saliency (..., 3), degenerate (...,)) from descending eigenvalue stacks.

    All-zero triples are degenerate and map to the point-type vertex
    (0, 0, 1); tiny negatives are clamped, larger ones rejected.
    """
    v = np.asarray(vals, dtype=np.float64)
    scale = np.maximum(1.0, np.abs(v[..., 0]))
    if np.any(v[..., 2] < -EIG_CLAMP * scale):
        worst = float((v[..., 2] / scale).min())
        raise ValidationError(f"tensor not PSD (relative eigenvalue {worst:.3e})")
    v = np.maximum(v, 0.0)
    total = v.sum(axis=-1)
    degenerate = total <= 0.0
    s = np.where(degenerate, 1.0, total)
    c_l = (v[..., 0] - v[..., 1]) / s
    c_s = 2.0 * (v[..., 1] - v[..., 2]) / s
    c_p = 3.0 * v[..., 2] / s
    out = np.stack([c_l, c_s, c_p], axis=-1)
    out[degenerate] = (0.0, 0.0, 1.0)
    return out, degenerate


def saliency(eigtriple):
    """Saliency triple of one descending eigenvalue triple (degenerate -> (0,0,1))."""
    vals = np.asarray(eigtriple, dtype=np.float64).reshape(3)
    tol = 1e-9 * max(1.0, float(np.abs(vals).max()))
    if vals[0] < vals[1] - tol or vals[1] < vals[2] - tol:
        raise ValidationError("eigenvalues must be sorted descending")
    vals = np.sort(vals)[::-1]  # canonicalize round-off inversions
    out, _ = saliency_from_eigvals(vals)
    return out


def _neighbors(index, point_idx, spec: NeighborhoodSpec):
    q = index.points[point_idx]
    if spec.kind == "knn":
        idx = index.knn(q, int(spec.scale))
    else:
        idx = index.radius(q, float(spec.scale))
    return idx, q


def covariance_tensor(cloud, index, point_idx: int, spec: NeighborhoodSpec):
    """Neighborhood covariance descriptor for one point.

    Returns (DescriptorTensor, degenerate flag); fewer than 3 neighbors
    (query point included) gives a zero tensor flagged degenerate.
    """
    idx, q = _neighbors(index, point_idx, spec)
    if idx.size < 3:
        return DescriptorTensor(np.zeros((3, 3)), DescriptorKind.COV, point_idx, spec.scale), True
    nb = index.points[idx] - q  # work relative to the query for stability
    mu = nb.mean(axis=0)
    d = nb - mu
    m = (d.T @ d) / idx.size
    return DescriptorTensor(m, DescriptorKind.COV, point_idx, spec.scale), False


def ball_vote_tensor(cloud, index, point_idx: int, spec: NeighborhoodSpec):
    """Sum of decayed plate votes from each neighbor of one point.

    A neighbor at offset dv casts w (I - v v^T) with v = dv/|dv| and
    w = exp(-|dv|^2 / sigma^2); sigma is the neighborhood scale (radius r,
    or the k-th neighbor distance for knn). Returns (tensor, degenerate).
    """
    idx, q = _neighbors(index, point_idx, spec)
    nb = index.points[idx] - q
    d = np.linalg.norm(nb, axis=1)
    if spec.kind == "spherical":
        sigma = float(spec.scale)
    else:
        sigma = float(d.max())
    voters = d > 0.0
    if idx.size < 2 or not voters.any() or sigma <= 0.0:
        return (
            DescriptorTensor(np.zeros((3, 3)), DescriptorKind.VOTE_RAW, point_idx, spec.scale),
            True,
        )
    dv = nb[voters]
    dd = d[voters]
    w = np.exp(-((dd / sigma) ** 2))
    v = dv / dd[:, None]
    a = (w[:, None] * v).T @ v
    m = w.sum() * np.eye(3) - a
    return DescriptorTensor(m, DescriptorKind.VOTE_RAW, point_idx, spec.scale), False


def diffuse_eigvals(vals) -> np.ndarray:
    """Eigenvalue remap of the diffusion step on descending stacks (..., 3).

    l_k -> exp(-l_k / kappa) with kappa the mean input eigenvalue; the map
    reverses order, so the output is the reversed stack (descending again).
    Zero triples map to zero (degenerate stays degenerate).
    """
    v = np.asarray(vals, dtype=np.float64)
    kappa = v.mean(axis=-1)
    ok = kappa > 0.0
    k = np.where(ok, kappa, 1.0)
    mapped = np.exp(-v / k[..., None])[..., ::-1]
    return np.where(ok[..., None], mapped, 0.0)


def anisotropic_diffuse(t: DescriptorTensor) -> DescriptorTensor:
    """Sharpen a raw vote tensor by the exponential eigenvalue remap.

    Eigenvectors are preserved; eigenvalue order reverses (the weakest
    vote direction becomes the strongest diffused response), which turns
    collinear-vote plates into line-dominant tensors.
    """
    if not isinstance(t, DescriptorTensor) or t.kind != DescriptorKind.VOTE_RAW:
        kind = getattr(t, "kind", None)
        raise ValidationError(f"diffusion needs a raw vote tensor, got kind {kind!r}")
    vals, vecs = eigen_sym3(t.m)
    new_vals = diffuse_eigvals(vals)
    # columns follow the reversal so column i still pairs with value i
    new_vecs = vecs[:, ::-1]
    m = (new_vecs * new_vals) @ new_vecs.T
    m = 0.5 * (m + m.T)
    return DescriptorTensor(m, DescriptorKind.VOTE_DIFFUSED, t.point_index, t.scale)


def descriptor_tensor(cloud, index, point_idx: int, spec: NeighborhoodSpec,
                      kind: DescriptorKind):
    """Single-point dispatch over descriptor kinds (reference path for tests)."""
    if kind == DescriptorKind.COV:
        return covariance_tensor(cloud, index, point_idx, spec)
    if kind == DescriptorKind.VOTE_RAW:
        return ball_vote_tensor(cloud, index, point_idx, spec)
    if kind == DescriptorKind.VOTE_DIFFUSED:
        t, degen = ball_vote_tensor(cloud, index, point_idx, spec)
        if degen:
            t.kind = DescriptorKind.VOTE_DIFFUSED
            return t, True
        return anisotropic_diffuse(t), False
    if kind == DescriptorKind.VOTE_GET:
        raise NotSupportedError("gradient-energy vote tensors are not supported")
    raise ValidationError(f"unknown descriptor kind {kind!r}")

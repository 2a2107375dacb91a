"""Barycentric signature images.

Every point's saliency triple is a convex weight over three fixed canvas
vertices (line top, plane bottom-left, sphere bottom-right), so a cloud
collapses to a 2D scatter inside the reference triangle regardless of its
3D orientation. Rasterized as grayscale occupancy (S_Gm) or class-colored
points (S_AgSm), always with the triangle mask alongside.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ParseError, ValidationError

DEFAULT_RESOLUTION = 512
_SIDE_FRACTION = 0.9
BACKGROUND = 0


@dataclass(frozen=True)
class ReferenceTriangle:
    """Pixel-space vertices, order (V_l, V_s, V_p) matching saliency columns."""

    v_l: tuple
    v_s: tuple
    v_p: tuple

    def __post_init__(self):
        if abs(self.signed_area()) <= 0.0:
            raise ValidationError("degenerate reference triangle")

    @classmethod
    def for_resolution(cls, resolution: int = DEFAULT_RESOLUTION) -> "ReferenceTriangle":
        """Equilateral layout, side 0.9 R, apex (line vertex) at the top."""
        if resolution < 8:
            raise ValidationError("resolution must be at least 8")
        r = float(resolution)
        side = _SIDE_FRACTION * r
        h = side * np.sqrt(3.0) / 2.0
        y_top = (r - h) / 2.0
        y_base = (r + h) / 2.0
        return cls(
            v_l=(r / 2.0, y_top),
            v_s=(0.95 * r, y_base),
            v_p=(0.05 * r, y_base),
        )

    def vertices(self) -> np.ndarray:
        return np.array([self.v_l, self.v_s, self.v_p], dtype=np.float64)

    def signed_area(self) -> float:
        (xl, yl), (xs, ys), (xp, yp) = self.v_l, self.v_s, self.v_p
        return 0.5 * ((xs - xl) * (yp - yl) - (xp - xl) * (ys - yl))

    def barycentric(self, xy) -> np.ndarray:
        """Barycentric coordinates (b_l, b_s, b_p) of pixel-space points (..., 2)."""
        p = np.asarray(xy, dtype=np.float64)
        v = self.vertices()
        t = np.stack([v[0] - v[2], v[1] - v[2]], axis=1)  # columns
        rhs = p - v[2]
        inv = np.linalg.inv(t)
        bl_bs = rhs @ inv.T
        bp = 1.0 - bl_bs[..., 0] - bl_bs[..., 1]
        return np.concatenate([bl_bs, bp[..., None]], axis=-1)

    def to_json(self) -> dict:
        return {"v_l": list(self.v_l), "v_s": list(self.v_s), "v_p": list(self.v_p)}

    @classmethod
    def from_json(cls, d) -> "ReferenceTriangle":
        try:
            return cls(tuple(d["v_l"]), tuple(d["v_s"]), tuple(d["v_p"]))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad triangle record: {exc}") from None


def barycentric_project(sal, tri: ReferenceTriangle) -> np.ndarray:
    """Map saliency triples (..., 3) to pixel coordinates (..., 2)."""
    s = np.asarray(sal, dtype=np.float64)
    return s @ tri.vertices()


def triangle_mask(tri: ReferenceTriangle, resolution: int) -> np.ndarray:
    """Pixels whose square can meet the triangle (center within half a
    pixel diagonal of it), so every projected point lands on the mask."""
    xs = np.arange(resolution) + 0.5
    centers = np.stack(np.meshgrid(xs, xs, indexing="xy"), axis=-1)  # (H, W, 2)
    b = tri.barycentric(centers)
    side = np.linalg.norm(np.array(tri.v_s) - np.array(tri.v_p))
    altitude = 2.0 * abs(tri.signed_area()) / side
    slack = (np.sqrt(2.0) / 2.0) / altitude
    return (b >= -slack).all(axis=-1)


@dataclass
class Signature:
    """Rendered signature: uint8 image (H, W) or (H, W, 3), mask, metadata."""

    image: np.ndarray
    mask: np.ndarray
    meta: dict

    @property
    def resolution(self) -> int:
        return self.image.shape[0]

    @property
    def is_rgb(self) -> bool:
        return self.image.ndim == 3


def _pixel_bins(geom_sal, tri, resolution):
    xy = barycentric_project(geom_sal, tri)
    ix = np.clip(np.floor(xy[..., 0]).astype(np.int64), 0, resolution - 1)
    iy = np.clip(np.floor(xy[..., 1]).astype(np.int64), 0, resolution - 1)
    return iy * resolution + ix


def render_geometric(geometry, tri: ReferenceTriangle = None,
                     resolution: int = DEFAULT_RESOLUTION, meta: dict = None) -> Signature:
    """Grayscale occupancy signature.

    Pixel value = ceil(255 * count / max_count): linear in density, any
    occupied pixel lit, empty and background pixels 0.
    """
    if len(geometry) == 0:
        raise ValidationError("no geometry to render")
    if tri is None:
        tri = ReferenceTriangle.for_resolution(resolution)
    sal = geometry.saliency if hasattr(geometry, "saliency") else np.asarray(geometry)
    flat = _pixel_bins(sal, tri, resolution)
    counts = np.bincount(flat, minlength=resolution * resolution)
    top = counts.max()
    img = np.ceil(counts * (255.0 / top)).astype(np.uint8).reshape(resolution, resolution)
    base = {"kind": "geometric", "resolution": resolution,
            "triangle_vertices": tri.to_json()}
    if meta:
        base.update(meta)
    return Signature(img, triangle_mask(tri, resolution), base)


def render_augmented(geometry, labels, scheme, tri: ReferenceTriangle = None,
                     resolution: int = DEFAULT_RESOLUTION, meta: dict = None) -> Signature:
    """Class-colored signature; overlapping points resolve by a fixed
    painter's order (sorted by class id then point index, last wins)."""
    if labels is None:
        raise ValidationError("augmented signature needs labels")
    labels = np.asarray(labels)
    sal = geometry.saliency if hasattr(geometry, "saliency") else np.asarray(geometry)
    if labels.shape[0] != sal.shape[0]:
        raise ValidationError("one label per geometry point required")
    if tri is None:
        tri = ReferenceTriangle.for_resolution(resolution)
    flat = _pixel_bins(sal, tri, resolution)
    order = np.argsort(labels, kind="stable")  # (class id, point index)
    ordered_pix = flat[order]
    ordered_lab = labels[order]
    # keep the last write per pixel without relying on assignment order
    upix, last_rev = np.unique(ordered_pix[::-1], return_index=True)
    winner = ordered_lab[::-1][last_rev]
    img = np.zeros((resolution * resolution, 3), dtype=np.uint8)
    img[upix] = scheme.rgb_table()[winner]
    base = {"kind": "augmented", "resolution": resolution,
            "triangle_vertices": tri.to_json(),
            "classes": list(scheme.classes), "colors": list(scheme.colors)}
    if meta:
        base.update(meta)
    return Signature(img.reshape(resolution, resolution, 3),
                     triangle_mask(tri, resolution), base)


def _sidecar_path(path) -> str:
    base, _ = os.path.splitext(str(path))
    return base + ".json"


def save_signature(sig: Signature, path) -> None:
    """PNG plus JSON sidecar; the mask is reproducible from the sidecar."""
    path = str(path)
    mode = "RGB" if sig.is_rgb else "L"
    tmp = path + ".tmp"
    Image.fromarray(sig.image, mode=mode).save(tmp, format="PNG")
    os.replace(tmp, path)
    side = _sidecar_path(path)
    tmp = side + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(sig.meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, side)


def load_signature(path) -> Signature:
    """Inverse of save_signature; pixel-exact."""
    path = str(path)
    try:
        with Image.open(path) as im:
            img = np.asarray(im)
    except UnidentifiedImageError:
        raise ParseError("not a valid signature image", path=path) from None
    try:
        with open(_sidecar_path(path), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad sidecar: {exc}", path=_sidecar_path(path)) from None
    if "triangle_vertices" not in meta or "resolution" not in meta:
        raise ParseError("sidecar missing triangle or resolution", path=_sidecar_path(path))
    tri = ReferenceTriangle.from_json(meta["triangle_vertices"])
    res = int(meta["resolution"])
    if img.shape[0] != res or img.shape[1] != res:
        raise ParseError(
            f"image is {img.shape[1]}x{img.shape[0]}, sidecar says {res}", path=path
        )
    return Signature(img, triangle_mask(tri, res), meta)

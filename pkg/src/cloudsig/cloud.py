"""Point cloud container, loading, normalization, and downsampling.

Clouds are immutable (N, 3) float64 arrays with optional integer class
labels mapped through a SemanticScheme. Coordinates are meters on input
and dimensionless after normalize().
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParseError, ValidationError, VocabularyError

DEFAULT_CLASS_NAMES = ("tree", "building", "low-vegetation", "road")
DEFAULT_CLASS_COLORS = ("#2e8b57", "#b22222", "#9acd32", "#708090")

_COLOR_RE = re.compile(r"^#[0-9a-fA-F]{6}$")
# one class per line: <id> = "<name>", color = "#RRGGBB"
_SCHEME_LINE_RE = re.compile(
    r'^\s*(\d+)\s*=\s*"([^"]+)"\s*,\s*color\s*=\s*"(#[0-9a-fA-F]{6})"\s*$'
)


@dataclass(frozen=True)
class SemanticScheme:
    """Ordered class vocabulary. Label id i means classes[i]."""

    classes: tuple
    colors: tuple

    def __post_init__(self):
        if len(self.classes) == 0:
            raise ValidationError("scheme needs at least one class")
        if len(self.classes) != len(self.colors):
            raise ValidationError("one color per class required")
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("class names must be unique")
        if len(set(c.lower() for c in self.colors)) != len(self.colors):
            raise ValidationError("class colors must be distinct")
        for c in self.colors:
            if not _COLOR_RE.match(c):
                raise ValidationError(f"bad color {c!r}, expected #RRGGBB")

    @classmethod
    def default(cls) -> "SemanticScheme":
        return cls(DEFAULT_CLASS_NAMES, DEFAULT_CLASS_COLORS)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def rgb_table(self) -> np.ndarray:
        """(K, 3) uint8 table of class colors."""
        out = np.zeros((len(self.colors), 3), dtype=np.uint8)
        for i, c in enumerate(self.colors):
            out[i] = [int(c[j : j + 2], 16) for j in (1, 3, 5)]
        return out

    def index_of(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise VocabularyError(f"unknown class name {name!r}") from None


def parse_scheme(path) -> SemanticScheme:
    """Read a class scheme file.

    Grammar, one class per non-comment line:
        <id> = "<name>", color = "#RRGGBB"
    Ids must be 0..K-1, each exactly once; order in the file is free.
    """
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            m = _SCHEME_LINE_RE.match(line)
            if m is None:
                raise ParseError("bad scheme line", line=ln, path=str(path))
            cid = int(m.group(1))
            if cid in entries:
                raise ParseError(f"duplicate class id {cid}", line=ln, path=str(path))
            entries[cid] = (m.group(2), m.group(3))
    if not entries:
        raise ParseError("scheme file defines no classes", path=str(path))
    k = len(entries)
    if sorted(entries) != list(range(k)):
        raise ParseError(f"class ids must be 0..{k - 1}", path=str(path))
    names = tuple(entries[i][0] for i in range(k))
    colors = tuple(entries[i][1] for i in range(k))
    return SemanticScheme(names, colors)


def format_scheme(scheme: SemanticScheme) -> str:
    lines = [f'{i} = "{n}", color = "{c}"' for i, (n, c) in enumerate(zip(scheme.classes, scheme.colors))]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScaleRecord:
    """Normalization bookkeeping: how to map dimensionless radii back to meters."""

    meters_per_unit: float
    bbox_min: tuple
    bbox_max: tuple
    seed: Optional[int] = None

    def radius_to_meters(self, r: float) -> float:
        return r * self.meters_per_unit

    def to_dict(self) -> dict:
        return {
            "meters_per_unit": self.meters_per_unit,
            "bbox_min": list(self.bbox_min),
            "bbox_max": list(self.bbox_max),
            "seed": self.seed,
        }


class PointCloud:
    """Immutable 3D point set with optional per-point class labels."""

    def __init__(self, points, labels=None, name: str = "cloud"):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"points must be (N, 3), got {pts.shape}")
        if pts.shape[0] == 0:
            raise ValidationError("empty point cloud")
        if not np.isfinite(pts).all():
            raise ValidationError("points contain non-finite coordinates")
        pts = pts.copy()
        pts.setflags(write=False)
        self._points = pts
        if labels is not None:
            lab = np.asarray(labels)
            if lab.shape != (pts.shape[0],):
                raise ValidationError("labels must have exactly one entry per point")
            lab = lab.astype(np.int64).copy()
            lab.setflags(write=False)
        else:
            lab = None
        self._labels = lab
        self.name = str(name)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def labels(self):
        return self._labels

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def has_labels(self) -> bool:
        return self._labels is not None

    def bbox(self):
        return self._points.min(axis=0), self._points.max(axis=0)

    def density(self) -> float:
        """Points per unit area of the xy bounding box."""
        lo, hi = self.bbox()
        area = float(hi[0] - lo[0]) * float(hi[1] - lo[1])
        if area <= 0.0:
            return float("nan")
        return self.n / area

    def with_name(self, name: str) -> "PointCloud":
        return PointCloud(self._points, self._labels, name)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        lab = "labeled" if self.has_labels else "unlabeled"
        return f"PointCloud({self.name!r}, n={self.n}, {lab})"


def _parse_rows(path, n_cols: int):
    rows = []
    line_nos = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != n_cols:
                raise ParseError(
                    f"expected {n_cols} comma-separated values, got {len(parts)}",
                    line=ln,
                    path=str(path),
                )
            rows.append(parts)
            line_nos.append(ln)
    if not rows:
        raise ParseError("no data rows", path=str(path))
    try:
        data = np.array(rows, dtype=np.float64)
    except ValueError:
        # locate the offending line for the error message
        for ln, parts in zip(line_nos, rows):
            for p in parts:
                try:
                    float(p)
                except ValueError:
                    raise ParseError(f"bad numeric value {p!r}", line=ln, path=str(path)) from None
        raise ParseError("malformed numeric data", path=str(path)) from None
    return data, line_nos


def load_cloud(path, format: str = "xyz-csv", scheme: Optional[SemanticScheme] = None,
               name: Optional[str] = None) -> PointCloud:
    """Load a delimited text cloud.

    xyz-csv rows are `x,y,z`, xyz-labeled-csv rows are `x,y,z,label` with
    label an integer id in the scheme (default scheme if none given).
    `#` comment lines and blank lines are skipped.
    """
    if format not in ("xyz-csv", "xyz-labeled-csv"):
        raise ValidationError(f"unknown format {format!r}")
    if name is None:
        name = str(path)
    if format == "xyz-csv":
        data, _ = _parse_rows(path, 3)
        return PointCloud(data, None, name)
    data, line_nos = _parse_rows(path, 4)
    labels_f = data[:, 3]
    labels = labels_f.astype(np.int64)
    if not np.array_equal(labels_f, labels.astype(np.float64)):
        bad = int(np.nonzero(labels_f != labels)[0][0])
        raise ParseError(
            f"label {labels_f[bad]!r} is not an integer", line=line_nos[bad], path=str(path)
        )
    if scheme is None:
        scheme = SemanticScheme.default()
    if labels.min() < 0 or labels.max() >= scheme.n_classes:
        bad = int(np.nonzero((labels < 0) | (labels >= scheme.n_classes))[0][0])
        raise VocabularyError(
            f"{path}:{line_nos[bad]}: class id {labels[bad]} not in scheme "
            f"(0..{scheme.n_classes - 1})"
        )
    return PointCloud(data[:, :3], labels, name)


def save_cloud(cloud: PointCloud, path) -> None:
    """Write a cloud in the same delimited format load_cloud reads."""
    with open(path, "w", encoding="utf-8") as fh:
        pts = cloud.points
        if cloud.has_labels:
            lab = cloud.labels
            for i in range(cloud.n):
                x, y, z = (float(v) for v in pts[i])
                fh.write(f"{x!r},{y!r},{z!r},{int(lab[i])}\n")
        else:
            for i in range(cloud.n):
                x, y, z = (float(v) for v in pts[i])
                fh.write(f"{x!r},{y!r},{z!r}\n")


def normalize(cloud: PointCloud, seed: Optional[int] = None):
    """Uniformly scale and translate the cloud into [-1, 1]^3.

    The bounding box midpoint goes to the origin and the longest axis spans
    exactly [-1, 1]; one scale factor for all axes, so shape is preserved.
    Returns (normalized cloud, ScaleRecord).
    """
    lo, hi = cloud.bbox()
    half = (hi - lo) / 2.0
    scale = float(half.max())
    if scale <= 0.0:
        raise ValidationError("degenerate extent: all points coincident")
    mid = (hi + lo) / 2.0
    pts = (cloud.points - mid) / scale
    rec = ScaleRecord(
        meters_per_unit=scale,
        bbox_min=tuple(float(v) for v in lo),
        bbox_max=tuple(float(v) for v in hi),
        seed=seed,
    )
    return PointCloud(pts, cloud.labels, cloud.name), rec


def downsample_uniform(cloud: PointCloud, fraction: float, seed: int) -> PointCloud:
    """Keep each point independently with probability `fraction` (seeded).

    The same seed gives nested keep-sets across fractions: the points kept
    at 40% are a subset of those kept at 60%.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    u = np.random.default_rng(seed).random(cloud.n)
    keep = u < fraction
    if not keep.any():
        raise ValidationError("downsample kept no points, fraction too small")
    labels = cloud.labels[keep] if cloud.has_labels else None
    return PointCloud(cloud.points[keep], labels, cloud.name)


def class_distribution(cloud: PointCloud, scheme: Optional[SemanticScheme] = None):
    """Normalized per-class fractions as a Histogram keyed by class names."""
    from .metrics import Histogram

    if not cloud.has_labels:
        raise ValidationError("cloud has no labels")
    if scheme is None:
        scheme = SemanticScheme.default()
    if cloud.labels.max() >= scheme.n_classes:
        raise VocabularyError("labels exceed scheme vocabulary")
    counts = np.bincount(cloud.labels, minlength=scheme.n_classes).astype(np.float64)
    return Histogram.from_class_counts(counts, scheme.classes)


def load_class_counts(path, scheme: Optional[SemanticScheme] = None):
    """Read a `name,count` CSV into a normalized class Histogram.

    Unlisted classes get zero mass; names outside the scheme are an error.
    """
    from .metrics import Histogram

    if scheme is None:
        scheme = SemanticScheme.default()
    counts = np.zeros(scheme.n_classes, dtype=np.float64)
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise ParseError("expected `name,count`", line=ln, path=str(path))
            name, cnt = parts
            if name in seen:
                raise ParseError(f"duplicate class {name!r}", line=ln, path=str(path))
            seen.add(name)
            idx = scheme.index_of(name)
            try:
                val = float(cnt)
            except ValueError:
                raise ParseError(f"bad count {cnt!r}", line=ln, path=str(path)) from None
            if val < 0:
                raise ParseError("counts must be non-negative", line=ln, path=str(path))
            counts[idx] = val
    if counts.sum() <= 0:
        raise ParseError("all counts zero", path=str(path))
    return Histogram.from_class_counts(counts, scheme.classes)

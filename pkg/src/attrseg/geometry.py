"""Mask and polygon primitives.

Masks are stored as uncompressed run-length encodings in column-major
order, starting with a run of zeros (the COCO convention), so that
annotation files from public releases can be read without transformation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryError, ZeroAreaError


@dataclass(frozen=True)
class BinaryMask:
    """Run-length encoded binary mask.

    ``runs`` alternate zero-run and one-run lengths over the column-major
    pixel order. The first run counts zeros and may be 0; every later run is
    strictly positive.
    """

    height: int
    width: int
    runs: tuple[int, ...]

    def __post_init__(self):
        runs = tuple(int(r) for r in self.runs)
        object.__setattr__(self, "runs", runs)
        if self.height < 0 or self.width < 0:
            raise GeometryError(f"negative mask size {self.height}x{self.width}")
        if any(r < 0 for r in runs):
            raise GeometryError("negative run length")
        if sum(runs) != self.height * self.width:
            raise GeometryError(
                f"corrupt mask: runs sum to {sum(runs)}, "
                f"expected {self.height * self.width}"
            )
        if any(r == 0 for r in runs[1:]):
            raise GeometryError("non-canonical runs: zero-length run after the first")

    @property
    def area(self) -> int:
        return sum(self.runs[1::2])

    def intervals(self) -> tuple[np.ndarray, np.ndarray]:
        """Start (inclusive) and end (exclusive) flat indices of the one-runs."""
        bounds = np.cumsum(np.asarray((0,) + self.runs, dtype=np.int64))
        return bounds[1:-1:2], bounds[2::2]


@dataclass(frozen=True)
class PolygonSet:
    """One or more disjoint polygons in pixel coordinates.

    Each polygon is a tuple of ``(x, y)`` vertices, implicitly closed.
    """

    polygons: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self):
        polys = []
        for poly in self.polygons:
            verts = tuple((float(x), float(y)) for x, y in poly)
            if len(verts) < 3:
                raise GeometryError(f"polygon with {len(verts)} vertices (need >= 3)")
            if not all(math.isfinite(v) for xy in verts for v in xy):
                raise GeometryError("non-finite polygon vertex")
            polys.append(verts)
        object.__setattr__(self, "polygons", tuple(polys))

    @classmethod
    def from_flat(cls, coords: Iterable[Sequence[float]]) -> "PolygonSet":
        """Build from COCO-style flat lists ``[x1, y1, x2, y2, ...]``."""
        polys = []
        for flat in coords:
            flat = list(flat)
            if len(flat) % 2:
                raise GeometryError("polygon coordinate list has odd length")
            polys.append(tuple(zip(flat[0::2], flat[1::2])))
        return cls(tuple(polys))

    def to_flat(self) -> list[list[float]]:
        return [[c for xy in poly for c in xy] for poly in self.polygons]


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise GeometryError(f"negative box size ({self.w}, {self.h})")

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


# -- RLE codec ---------------------------------------------------------------


def encode(grid) -> BinaryMask:
    """Encode a dense ``(height, width)`` bit grid as canonical runs."""
    grid = np.asarray(grid, dtype=bool)
    if grid.ndim != 2:
        raise GeometryError(f"expected a 2-D grid, got shape {grid.shape}")
    height, width = grid.shape
    flat = grid.ravel(order="F").astype(np.int8)
    if flat.size == 0:
        return BinaryMask(height, width, (0,))
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return BinaryMask(height, width, tuple(runs))


def decode(mask: BinaryMask) -> np.ndarray:
    """Expand runs into a dense boolean grid of shape ``(height, width)``."""
    values = np.zeros(len(mask.runs), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, mask.runs)
    return flat.reshape((mask.height, mask.width), order="F")


# -- overlap -----------------------------------------------------------------


def _coverage(starts: np.ndarray, ends: np.ndarray, x: np.ndarray) -> np.ndarray:
    # number of set pixels in [0, x) for a sorted disjoint interval list
    if starts.size == 0:
        return np.zeros_like(x)
    lengths = ends - starts
    before = np.concatenate(([0], np.cumsum(lengths)))
    k = np.searchsorted(starts, x, side="right")
    prev = np.maximum(k - 1, 0)
    partial = np.clip(x - starts[prev], 0, lengths[prev])
    return np.where(k > 0, before[prev] + partial, 0)


def intersection_area(a: BinaryMask, b: BinaryMask) -> int:
    """Number of pixels set in both masks, computed on the run form."""
    _check_same_size(a, b)
    a_starts, a_ends = a.intervals()
    b_starts, b_ends = b.intervals()
    if a_starts.size == 0 or b_starts.size == 0:
        return 0
    inside = _coverage(b_starts, b_ends, a_ends) - _coverage(b_starts, b_ends, a_starts)
    return int(inside.sum())


def _check_same_size(a: BinaryMask, b: BinaryMask) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise GeometryError(
            f"mask size mismatch: {a.height}x{a.width} vs {b.height}x{b.width}"
        )


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two masks; 0.0 when both are empty."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def mask_iou_dense(a: BinaryMask, b: BinaryMask) -> float:
    """Reference IoU on the decoded grids. Slow; used to check :func:`mask_iou`."""
    _check_same_size(a, b)
    da, db = decode(a), decode(b)
    union = int(np.logical_or(da, db).sum())
    if union == 0:
        return 0.0
    return int(np.logical_and(da, db).sum()) / union


def bbox_iou(a: BBox, b: BBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def mask_to_bbox(mask: BinaryMask) -> BBox:
    grid = decode(mask)
    rows = np.flatnonzero(grid.any(axis=1))
    cols = np.flatnonzero(grid.any(axis=0))
    if rows.size == 0:
        return BBox(0.0, 0.0, 0.0, 0.0)
    return BBox(float(cols[0]), float(rows[0]),
                float(cols[-1] - cols[0] + 1), float(rows[-1] - rows[0] + 1))


def polygon_bbox(p: PolygonSet) -> BBox:
    if not p.polygons:
        return BBox(0.0, 0.0, 0.0, 0.0)
    xs = [x for poly in p.polygons for x, _ in poly]
    ys = [y for poly in p.polygons for _, y in poly]
    return BBox(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))


# -- rasterization -----------------------------------------------------------


def _fill_polygon(poly, height: int, width: int) -> np.ndarray:
    pts = np.asarray(poly, dtype=np.float64)
    x0, y0 = pts[:, 0], pts[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    centers = np.arange(height) + 0.5
    # half-open crossing rule: an edge crosses row y iff exactly one endpoint is <= y
    crosses = (y0[:, None] <= centers[None, :]) != (y1[:, None] <= centers[None, :])
    edge_idx, rows = np.nonzero(crosses)
    if rows.size == 0:
        return np.zeros((height, width), dtype=bool)
    yc = centers[rows]
    t = (yc - y0[edge_idx]) / (y1[edge_idx] - y0[edge_idx])
    xc = x0[edge_idx] + t * (x1[edge_idx] - x0[edge_idx])
    # a crossing at xc toggles every pixel whose center lies strictly left of it
    n = np.clip(np.ceil(xc - 0.5), 0, width).astype(np.int64)
    diff = np.zeros((height, width + 1), dtype=np.int64)
    np.add.at(diff, (rows, np.zeros_like(rows)), 1)
    np.add.at(diff, (rows, n), -1)
    counts = np.cumsum(diff, axis=1)[:, :width]
    return (counts % 2).astype(bool)


def rasterize(p: PolygonSet, height: int, width: int) -> BinaryMask:
    """Rasterize polygons with the pixel-center even-odd rule.

    Each polygon is filled on its own and the results are OR-ed together.
    Pixel ``(r, c)`` is set when its center ``(c + 0.5, r + 0.5)`` is inside.
    """
    if height <= 0 or width <= 0:
        raise GeometryError(f"invalid raster size {height}x{width}")
    grid = np.zeros((height, width), dtype=bool)
    for poly in p.polygons:
        grid |= _fill_polygon(poly, height, width)
    return encode(grid)


# -- measurements ------------------------------------------------------------


def mask_area(m: BinaryMask) -> int:
    return m.area


def _signed_area(poly) -> float:
    pts = np.asarray(poly, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _perimeter(poly) -> float:
    pts = np.asarray(poly, dtype=np.float64)
    return float(np.hypot(*(np.roll(pts, -1, axis=0) - pts).T).sum())


def polygon_area(p: PolygonSet) -> float:
    """Sum of absolute shoelace areas over all polygons."""
    return sum(abs(_signed_area(poly)) for poly in p.polygons)


def polygon_perimeter(p: PolygonSet) -> float:
    return sum(_perimeter(poly) for poly in p.polygons)


def boundary_complexity(p: PolygonSet) -> float:
    """Perimeter divided by the perimeter of a disk with the same area.

    A disk scores 1 and more intricate outlines score higher. Areas and
    perimeters are summed over all polygons of the instance first.

    Raises:
        ZeroAreaError: the instance has no area and must be skipped.
    """
    area = polygon_area(p)
    if area <= 0:
        raise ZeroAreaError("zero-area instance has no boundary complexity")
    return polygon_perimeter(p) / math.sqrt(4 * math.pi * area)


def relative_size(instance_area: float, image_height: int, image_width: int) -> float:
    """Square root of the instance's share of the image area."""
    if image_height <= 0 or image_width <= 0:
        raise GeometryError(f"invalid image size {image_height}x{image_width}")
    image_area = image_height * image_width
    if instance_area < 0 or instance_area > image_area:
        raise GeometryError(
            f"instance area {instance_area} outside [0, {image_area}]"
        )
    return math.sqrt(instance_area / image_area)


def vertices_per_polygon(p: PolygonSet) -> list[int]:
    """Vertex count of each polygon, skipping zero-area polygons."""
    return [len(poly) for poly in p.polygons if _signed_area(poly) != 0.0]

"""Geometric primitives: points, segments, contours and models.

Everything here is immutable once constructed. Coordinates are millimetres,
stored as Python floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .exceptions import InvalidGeometry

TOL = 1e-9


class Point3(NamedTuple):
    x: float
    y: float
    z: float


class LineSegment(NamedTuple):
    start: Point3
    end: Point3

    @property
    def length(self) -> float:
        return dist(self.start, self.end)


class Rect(NamedTuple):
    """Axis-aligned rectangle ``[xmin, xmax] x [ymin, ymax]``."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float


def dist(a: Point3, b: Point3) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def _close(a: Point3, b: Point3) -> bool:
    return dist(a, b) <= TOL


@dataclass(frozen=True)
class Contour:
    """A run of segments printed in one continuous extrusion.

    Orientation is fixed: the extruder enters at ``start`` and leaves at ``end``.
    """

    id: int
    segments: tuple[LineSegment, ...]
    layer: int
    closed: bool = False
    _length: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = tuple(LineSegment(Point3(*map(float, s[0])), Point3(*map(float, s[1]))) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise InvalidGeometry(f"contour {self.id}: no segments")
        z = segs[0].start.z
        for k, seg in enumerate(segs):
            for p in seg:
                if not all(math.isfinite(c) for c in p):
                    raise InvalidGeometry(f"contour {self.id}: non-finite coordinate {p}")
            if seg.length <= TOL:
                raise InvalidGeometry(f"contour {self.id}: zero-length segment {k}")
            if abs(seg.start.z - z) > TOL or abs(seg.end.z - z) > TOL:
                raise InvalidGeometry(f"contour {self.id}: segment {k} leaves plane z={z}")
            if k and not _close(segs[k - 1].end, seg.start):
                raise InvalidGeometry(f"contour {self.id}: segments {k - 1} and {k} are not connected")
        if self.closed and not _close(segs[-1].end, segs[0].start):
            raise InvalidGeometry(f"contour {self.id}: marked closed but does not return to its start")
        object.__setattr__(self, "_length", math.fsum(s.length for s in segs))

    @classmethod
    def from_points(cls, id: int, points: Sequence[Sequence[float]], z: float, layer: int,
                    closed: bool = False) -> "Contour":
        """Build a contour from XY vertices; a closed contour gets a final segment back to the first vertex."""
        pts = [Point3(float(p[0]), float(p[1]), float(z)) for p in points]
        if closed:
            pts.append(pts[0])
        segs = tuple(LineSegment(a, b) for a, b in zip(pts, pts[1:]))
        return cls(id=id, segments=segs, layer=layer, closed=closed)

    @property
    def start(self) -> Point3:
        return self.segments[0].start

    @property
    def end(self) -> Point3:
        return self.segments[-1].end

    @property
    def z(self) -> float:
        return self.segments[0].start.z

    @property
    def points(self) -> list[Point3]:
        return [self.segments[0].start] + [s.end for s in self.segments]

    @property
    def print_length(self) -> float:
        return self._length


@dataclass(frozen=True)
class Model:
    contours: tuple[Contour, ...]
    layer_heights: tuple[float, ...]
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "contours", tuple(self.contours))
        object.__setattr__(self, "layer_heights", tuple(float(z) for z in self.layer_heights))
        hs = self.layer_heights
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise InvalidGeometry("layer heights must be sorted and distinct")
        for i, c in enumerate(self.contours):
            if c.id != i:
                raise InvalidGeometry(f"contour ids must be 0..n-1, found {c.id} at position {i}")
            if not 0 <= c.layer < len(hs):
                raise InvalidGeometry(f"contour {i}: layer {c.layer} out of range")
            if abs(hs[c.layer] - c.z) > TOL:
                raise InvalidGeometry(f"contour {i}: z={c.z} does not match layer height {hs[c.layer]}")

    @classmethod
    def from_contours(cls, items: Iterable[tuple[Sequence[Sequence[float]], float, bool]],
                      name: str = "model") -> "Model":
        """Assemble a model from ``(xy_points, z, closed)`` triples; ids follow input order."""
        items = list(items)
        heights = sorted({float(z) for _, z, _ in items})
        index = {z: k for k, z in enumerate(heights)}
        contours = [Contour.from_points(i, pts, z, index[float(z)], closed)
                    for i, (pts, z, closed) in enumerate(items)]
        return cls(tuple(contours), tuple(heights), name)

    def __len__(self) -> int:
        return len(self.contours)

    def layer_contours(self, layer: int) -> list[Contour]:
        return [c for c in self.contours if c.layer == layer]

    def translated(self, dx: float, dy: float, dz: float = 0.0) -> "Model":
        def move(p):
            return Point3(p.x + dx, p.y + dy, p.z + dz)

        contours = tuple(Contour(c.id, tuple(LineSegment(move(s.start), move(s.end)) for s in c.segments),
                                 c.layer, c.closed) for c in self.contours)
        return Model(contours, tuple(z + dz for z in self.layer_heights), self.name)


def travel_distance(a: Contour, b: Contour) -> float:
    """Extrusionless move from the end of ``a`` to the start of ``b``."""
    return dist(a.end, b.start)


def print_length(c: Contour) -> float:
    return c.print_length


def xy_footprint(c: Contour) -> Rect:
    xs = [p.x for p in c.points]
    ys = [p.y for p in c.points]
    return Rect(min(xs), max(xs), min(ys), max(ys))


def rect_clearance(a: Rect, b: Rect) -> float:
    dx = max(b.xmin - a.xmax, a.xmin - b.xmax, 0.0)
    dy = max(b.ymin - a.ymax, a.ymin - b.ymax, 0.0)
    return math.hypot(dx, dy)


def footprint_clearance(a: Contour, b: Contour) -> float:
    """Minimum XY gap between the bounding rectangles of two contours (0 when they overlap)."""
    return rect_clearance(xy_footprint(a), xy_footprint(b))


def travel_matrix(model: Model) -> np.ndarray:
    """``W[i, j]`` is the travel from the end of contour i to the start of contour j."""
    ends = np.array([c.end for c in model.contours], dtype=float).reshape(-1, 3)
    starts = np.array([c.start for c in model.contours], dtype=float).reshape(-1, 3)
    diff = ends[:, None, :] - starts[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def models_close(a: Model, b: Model, tol: float = TOL) -> bool:
    """Structural equality with coordinates compared to within ``tol``."""
    if a.name != b.name or len(a) != len(b) or len(a.layer_heights) != len(b.layer_heights):
        return False
    if any(abs(x - y) > tol for x, y in zip(a.layer_heights, b.layer_heights)):
        return False
    for ca, cb in zip(a.contours, b.contours):
        if (ca.id, ca.layer, ca.closed, len(ca.segments)) != (cb.id, cb.layer, cb.closed, len(cb.segments)):
            return False
        for pa, pb in zip(ca.points, cb.points):
            if any(abs(u - v) > tol for u, v in zip(pa, pb)):
                return False
    return True

"""Contour dependency graph induced by extruder-head geometry.

An edge ``i -> j`` means contour ``i`` must be printed before contour ``j``:
once ``j`` is down, the head can no longer reach ``i``. Transitive edges
produced by the collision rule are kept as-is.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .exceptions import InvalidGeometry
from .geometry import TOL, Model, xy_footprint
from .validation import check_order


@dataclass(frozen=True)
class ExtruderGeometry:
    """Frustum-shaped keep-out volume around the nozzle.

    The XY clearance needed between a contour and one printed ``h`` mm above it
    is ``nozzle_clearance_radius + cone_slope * h``.
    """

    nozzle_clearance_radius: float = 1.0
    cone_slope: float = 0.5

    def __post_init__(self):
        if not self.nozzle_clearance_radius >= 0 or not self.cone_slope >= 0:
            raise InvalidGeometry("extruder clearance radius and cone slope must be non-negative")

    def reach(self, dz):
        return self.nozzle_clearance_radius + self.cone_slope * dz


def _bits(mask: int) -> frozenset[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return frozenset(out)


class DependencyGraph:
    """Immutable DAG over contour ids ``0..n-1``.

    ``succ[i]`` holds direct dependers of ``i``; ``pred[i]`` its direct dependees.
    Ancestor and descendant sets are also available as int bitmasks
    (``ancestor_mask`` / ``descendant_mask``) for fast set algebra.
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int]], layers: Sequence[int] | None = None):
        self.n = int(n)
        succ = [set() for _ in range(self.n)]
        pred = [set() for _ in range(self.n)]
        for a, b in edges:
            a, b = int(a), int(b)
            if not (0 <= a < self.n and 0 <= b < self.n) or a == b:
                raise ValueError(f"invalid edge ({a}, {b}) for {self.n} contours")
            if layers is not None and not layers[a] < layers[b]:
                raise ValueError(f"edge ({a}, {b}) does not go upward in layer index")
            succ[a].add(b)
            pred[b].add(a)
        self.succ = tuple(frozenset(s) for s in succ)
        self.pred = tuple(frozenset(p) for p in pred)
        self.layers = tuple(layers) if layers is not None else None
        self.topological_order = self._toposort()
        depth = [0] * self.n
        for v in self.topological_order:
            for u in self.pred[v]:
                depth[v] = max(depth[v], depth[u] + 1)
        self.depth = tuple(depth)

    def _toposort(self) -> tuple[int, ...]:
        indeg = [len(p) for p in self.pred]
        heap = [v for v in range(self.n) if indeg[v] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            v = heapq.heappop(heap)
            order.append(v)
            for w in self.succ[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    heapq.heappush(heap, w)
        if len(order) != self.n:
            raise ValueError("dependency graph contains a cycle")
        return tuple(order)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((a, b) for a in range(self.n) for b in self.succ[a])

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ)

    @cached_property
    def ancestor_mask(self) -> tuple[int, ...]:
        anc = [0] * self.n
        for v in self.topological_order:
            m = 0
            for u in self.pred[v]:
                m |= anc[u] | (1 << u)
            anc[v] = m
        return tuple(anc)

    @cached_property
    def descendant_mask(self) -> tuple[int, ...]:
        desc = [0] * self.n
        for v in reversed(self.topological_order):
            m = 0
            for w in self.succ[v]:
                m |= desc[w] | (1 << w)
            desc[v] = m
        return tuple(desc)

    @cached_property
    def pred_mask(self) -> tuple[int, ...]:
        return tuple(sum(1 << u for u in p) for p in self.pred)

    def dependees(self, c: int) -> frozenset[int]:
        return _bits(self.ancestor_mask[c])

    def dependers(self, c: int) -> frozenset[int]:
        return _bits(self.descendant_mask[c])

    def depth_of(self, c: int) -> int:
        return self.depth[c]

    def is_feasible_order(self, order: Sequence[int]) -> bool:
        order = check_order(order, self.n)
        pos = [0] * self.n
        for k, c in enumerate(order):
            pos[c] = k
        return all(pos[a] < pos[b] for a in range(self.n) for b in self.succ[a])

    def to_dot(self, name: str = "dependencies") -> str:
        lines = [f'digraph "{name}" {{', "  rankdir=TB;"]
        by_depth: dict[int, list[int]] = {}
        for c in range(self.n):
            by_depth.setdefault(self.depth[c], []).append(c)
        for d in sorted(by_depth):
            members = " ".join(f"c{c};" for c in by_depth[d])
            lines.append(f"  {{ rank=same; {members} }}")
        for c in range(self.n):
            lines.append(f'  c{c} [label="{c}\\nd={self.depth[c]}"];')
        for a, b in self.edges:
            lines.append(f"  c{a} -> c{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"DependencyGraph(n={self.n}, edges={self.n_edges})"


def build_dependency_graph(model: Model, geometry: ExtruderGeometry | None = None) -> DependencyGraph:
    """Add ``i -> j`` for every lower/upper pair whose footprints are within the head's reach."""
    geometry = geometry or ExtruderGeometry()
    n = len(model)
    rects = np.array([xy_footprint(c) for c in model.contours], dtype=float).reshape(n, 4)
    z = np.array([c.z for c in model.contours], dtype=float)
    layer = np.array([c.layer for c in model.contours], dtype=int)
    xmin, xmax, ymin, ymax = rects.T
    dx = np.maximum(np.maximum(xmin[None, :] - xmax[:, None], xmin[:, None] - xmax[None, :]), 0.0)
    dy = np.maximum(np.maximum(ymin[None, :] - ymax[:, None], ymin[:, None] - ymax[None, :]), 0.0)
    gap = np.hypot(dx, dy)
    reach = geometry.reach(z[None, :] - z[:, None])
    mask = (layer[:, None] < layer[None, :]) & (gap <= reach + TOL)
    src, dst = np.nonzero(mask)
    return DependencyGraph(n, zip(src.tolist(), dst.tolist()), layers=layer.tolist())


def depth_of(d: DependencyGraph, c: int) -> int:
    return d.depth_of(c)


def dependees(d: DependencyGraph, c: int) -> frozenset[int]:
    return d.dependees(c)


def dependers(d: DependencyGraph, c: int) -> frozenset[int]:
    return d.dependers(c)


def is_feasible_order(d: DependencyGraph, order: Sequence[int]) -> bool:
    return d.is_feasible_order(order)

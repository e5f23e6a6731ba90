"""Extrusionless travel objective and the Toolpath record."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .depgraph import DependencyGraph
from .exceptions import InfeasibleToolpath, NotAPermutation
from .geometry import Model, travel_matrix


@dataclass(frozen=True)
class Toolpath:
    order: tuple[int, ...]
    travel: float
    planner: str = ""

    def __len__(self):
        return len(self.order)


def path_travel(W, order: Sequence[int]) -> float:
    """Sum of hops along ``order``; ``W`` is a nested list or array travel matrix."""
    total = 0.0
    for a, b in zip(order, order[1:]):
        total += W[a][b]
    return float(total)


def evaluate_toolpath(m: Model, d: DependencyGraph, order: Sequence[int], W=None) -> float:
    """Total extrusionless travel of a feasible order (home-to-first move excluded)."""
    try:
        feasible = d.is_feasible_order(order)
    except NotAPermutation as exc:
        raise InfeasibleToolpath(str(exc)) from None
    if not feasible:
        raise InfeasibleToolpath("order violates the dependency graph")
    if W is None:
        W = travel_matrix(m)
    return path_travel(W, list(order))


def travel_upper_bound(m: Model, W=None) -> float:
    """Longest pairwise travel times the number of contours.

    Falls back to 1.0 when that product is zero (a single contour, or every
    contour starting where every other ends), where any positive constant works.
    """
    n = len(m)
    if n < 2:
        return 1.0
    W = travel_matrix(m) if W is None else np.asarray(W, dtype=float)
    off = W[~np.eye(n, dtype=bool)]
    bound = float(off.max()) * n
    return bound if bound > 0 else 1.0


def make_toolpath(m: Model, d: DependencyGraph, order: Sequence[int], planner: str, W=None) -> Toolpath:
    order = tuple(int(c) for c in order)
    return Toolpath(order, evaluate_toolpath(m, d, order, W), planner)

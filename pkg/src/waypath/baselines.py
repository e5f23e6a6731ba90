"""Reference planners: layer-by-layer, greedy, local search and exhaustive."""
from __future__ import annotations

import math
import random
import time

from .depgraph import DependencyGraph
from .exceptions import TooLarge
from .geometry import TOL, Model, travel_matrix
from .objective import Toolpath, make_toolpath, path_travel


def _nearest(row, candidates):
    best, bd = candidates[0], row[candidates[0]]
    for c in candidates[1:]:
        if row[c] < bd - TOL:
            best, bd = c, row[c]
    return best


def plan_layerwise(m: Model, d: DependencyGraph) -> Toolpath:
    """Slicer-style plan: finish each layer, nearest-neighbour inside it."""
    W = travel_matrix(m).tolist()
    order: list[int] = []
    for layer in range(len(m.layer_heights)):
        left = [c.id for c in m.contours if c.layer == layer]
        while left:
            pick = left[0] if not order else _nearest(W[order[-1]], left)
            left.remove(pick)
            order.append(pick)
    return make_toolpath(m, d, order, "layerwise", W)


def plan_greedy(m: Model, d: DependencyGraph) -> Toolpath:
    """Always print the nearest contour whose dependees are all done.

    The extruder starts at the start point of contour 0.
    """
    W = travel_matrix(m).tolist()
    start = m.contours[0].start
    first_row = [math.dist(start, c.start) for c in m.contours]
    indeg = [len(p) for p in d.pred]
    ready = [c for c in range(d.n) if indeg[c] == 0]
    order: list[int] = []
    while ready:
        row = W[order[-1]] if order else first_row
        pick = _nearest(row, ready)
        ready.remove(pick)
        order.append(pick)
        for s in d.succ[pick]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
        ready.sort()
    return make_toolpath(m, d, order, "greedy", W)


class _LocalSearch:
    """First-improvement descent over relocate and segment-reversal moves."""

    def __init__(self, m, d, order, rng, W):
        self.W = W
        self.pred = [sorted(p) for p in d.pred]
        self.succ = [sorted(s) for s in d.succ]
        self.rng = rng
        self.order = list(order)
        self.travel = path_travel(W, self.order)

    def _hop(self, a, b):
        if a is None or b is None:
            return 0.0
        return self.W[a][b]

    def try_relocate(self, i):
        c = self.order[i]
        rest = self.order[:i] + self.order[i + 1:]
        pos = {x: k for k, x in enumerate(rest)}
        lo = max((pos[p] for p in self.pred[c]), default=-1)
        hi = min((pos[s] for s in self.succ[c]), default=len(rest))
        prev = rest[i - 1] if i > 0 else None
        nxt = rest[i] if i < len(rest) else None
        removal = self._hop(prev, c) + self._hop(c, nxt) - self._hop(prev, nxt)
        # j is the gap before rest[j]; gap i puts c back where it was
        targets = [j for j in range(lo + 1, hi + 1) if j != i]
        self.rng.shuffle(targets)
        for j in targets:
            a = rest[j - 1] if j > 0 else None
            b = rest[j] if j < len(rest) else None
            insertion = self._hop(a, c) + self._hop(c, b) - self._hop(a, b)
            if insertion - removal < -TOL:
                new = rest[:j] + [c] + rest[j:]
                t = path_travel(self.W, new)
                if t < self.travel - TOL:
                    self.order, self.travel = new, t
                    return True
        return False

    def try_reverse(self, i):
        order, W = self.order, self.W
        n = len(order)
        prev = order[i - 1] if i > 0 else None
        inside = {order[i]}
        forward = backward = 0.0
        gains = []
        for j in range(i + 1, n):
            c = order[j]
            # reversal flips every pair inside the segment, so none may depend on another
            if any(p in inside for p in self.pred[c]):
                break
            inside.add(c)
            forward += W[order[j - 1]][c]
            backward += W[c][order[j - 1]]
            nxt = order[j + 1] if j + 1 < n else None
            delta = (self._hop(prev, c) + self._hop(order[i], nxt) + backward
                     - self._hop(prev, order[i]) - self._hop(c, nxt) - forward)
            if delta < -TOL:
                gains.append(j)
        self.rng.shuffle(gains)
        for j in gains:
            new = order[:i] + order[i:j + 1][::-1] + order[j + 1:]
            t = path_travel(W, new)
            if t < self.travel - TOL:
                self.order, self.travel = new, t
                return True
        return False

    def run(self, max_iter, deadline):
        it = 0
        improved = True
        while improved and (max_iter is None or it < max_iter):
            if deadline is not None and time.perf_counter() > deadline:
                break
            it += 1
            improved = False
            idx = list(range(len(self.order)))
            self.rng.shuffle(idx)
            for i in idx:
                if self.try_relocate(i) or self.try_reverse(i):
                    improved = True
                    break
        return it


def plan_local_search(m: Model, d: DependencyGraph, seed: int = 0, budget: int | None = 10_000,
                      time_budget: float | None = None) -> Toolpath:
    """Descent from the layerwise plan; ``budget`` caps the number of accepted moves."""
    W = travel_matrix(m).tolist()
    start = plan_layerwise(m, d)
    ls = _LocalSearch(m, d, start.order, random.Random(seed), W)
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    ls.run(budget, deadline)
    return make_toolpath(m, d, ls.order, "local", W)


def plan_exact(m: Model, d: DependencyGraph, limit: int = 9) -> Toolpath:
    """Optimal order by depth-first enumeration of topological orders with branch and bound."""
    n = d.n
    if n > limit:
        raise TooLarge(f"exact planner is limited to {limit} contours, model has {n}")
    W = travel_matrix(m).tolist()
    pred_mask = d.pred_mask
    full = (1 << n) - 1
    best_cost = math.inf
    best_order: list[int] = []
    order: list[int] = []

    def dfs(done, cost):
        nonlocal best_cost, best_order
        if done == full:
            if cost < best_cost:
                best_cost, best_order = cost, list(order)
            return
        last = order[-1] if order else None
        for c in range(n):
            if done >> c & 1 or pred_mask[c] & ~done:
                continue
            step = W[last][c] if last is not None else 0.0
            if cost + step >= best_cost:
                continue
            order.append(c)
            dfs(done | (1 << c), cost + step)
            order.pop()

    dfs(0, 0.0)
    return make_toolpath(m, d, best_order, "exact", W)


def enumerate_topological_orders(d: DependencyGraph):
    """Yield every feasible order (no pruning); exponential, intended for oracles on tiny graphs."""
    n = d.n
    pred_mask = d.pred_mask
    order: list[int] = []

    def rec(done):
        if len(order) == n:
            yield tuple(order)
            return
        for c in range(n):
            if not done >> c & 1 and not pred_mask[c] & ~done:
                order.append(c)
                yield from rec(done | (1 << c))
                order.pop()

    yield from rec(0)

"""Anytime Monte Carlo Tree Search over orderings of the clustered dependency graph.

Tree nodes are prefixes of a cluster order. Each iteration selects with UCB1,
expands one child, completes the order with a random rollout, flattens the
clusters into contours and backs up the normalised reward
``(upper_bound - travel) / upper_bound``. The best rollout ever seen is kept,
so the search can be stopped at any time.
"""
from __future__ import annotations

import bisect
import csv
import io
import logging
import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from .clustering import ClusteredGraph, Sequencer
from .depgraph import DependencyGraph
from .geometry import TOL, Model, travel_matrix
from .objective import evaluate_toolpath, path_travel, travel_upper_bound
from .validation import check_fraction

logger = logging.getLogger(__name__)

ROLLOUT_POLICIES = ("uniform", "greedy_biased")


@dataclass
class SearchConfig:
    """Search knobs. Budgets are in seconds; ``None`` means unlimited."""

    ucb_constant: float = math.sqrt(2)
    seed: int = 0
    max_iterations: int | None = None
    wall_budget: float | None = None
    stagnation_budget: float | None = 300.0
    rollout_policy: str = "uniform"
    greedy_bias: float = 0.0

    def __post_init__(self):
        if not self.ucb_constant >= 0:
            raise ValueError("ucb_constant must be >= 0")
        if self.rollout_policy not in ROLLOUT_POLICIES:
            raise ValueError(f"rollout_policy must be one of {ROLLOUT_POLICIES}")
        check_fraction(self.greedy_bias, "greedy_bias")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("wall_budget", "stagnation_budget"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Rollout:
    order: tuple[int, ...]
    flattened: tuple[int, ...]
    travel: float
    reward: float


class TracePoint(NamedTuple):
    iteration: int
    elapsed_ms: float
    best_travel: float


@dataclass
class SearchResult:
    best: Rollout
    trace: list[TracePoint]
    iterations: int
    exhausted: bool
    stop_reason: str
    upper_bound: float
    tree_size: int = 0
    extra: dict = field(default_factory=dict)


class _Node:
    __slots__ = ("action", "parent", "children", "unexpanded", "visits", "total_reward",
                 "printed", "exhausted")

    def __init__(self, action, parent, printed, actions):
        self.action = action
        self.parent = parent
        self.children = []
        self.unexpanded = actions
        self.visits = 0
        self.total_reward = 0.0
        self.printed = printed
        self.exhausted = not actions


def _ready(cg: ClusteredGraph, printed: int) -> list[int]:
    return [k for k in range(len(cg)) if not printed >> k & 1 and not cg.pred_mask[k] & ~printed]


def flatten(cg: ClusteredGraph, cluster_order: Sequence[int], m: Model, d: DependencyGraph | None = None) -> list[int]:
    """Expand a cluster order into a contour order, threading the exit point between clusters."""
    return Sequencer(m, cg).flatten(cluster_order)


class _Search:
    def __init__(self, m: Model, d: DependencyGraph, cg: ClusteredGraph, cfg: SearchConfig):
        self.m, self.d, self.cg, self.cfg = m, d, cg, cfg
        W = travel_matrix(m)
        self.upper = travel_upper_bound(m, W)
        self.W = W.tolist()
        self.seq = Sequencer(m, cg)
        self.rng = random.Random(int(cfg.seed))
        self.H = len(cg)
        self.succ = [sorted(s) for s in cg.succ]
        self.n_pred = [len(p) for p in cg.pred]

    def complete(self, prefix: list[int], printed: int) -> list[int]:
        """Randomly extend ``prefix`` to a full topological order of the clusters."""
        rng, cfg = self.rng, self.cfg
        indeg = list(self.n_pred)
        for k in prefix:
            for s in self.succ[k]:
                indeg[s] -= 1
        ready = [k for k in range(self.H) if not printed >> k & 1 and indeg[k] == 0]
        order = list(prefix)
        prev = self._exit(order)
        greedy = cfg.rollout_policy == "greedy_biased" and cfg.greedy_bias > 0
        while ready:
            if greedy and rng.random() < cfg.greedy_bias:
                idx = self._nearest(ready, prev)
            else:
                idx = rng.randrange(len(ready))
            k = ready.pop(idx)
            order.append(k)
            prev = self.seq.after(k, prev)[-1]
            for s in self.succ[k]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    bisect.insort(ready, s)
        return order

    def _exit(self, order):
        if not order:
            return None
        return self.seq.flatten(order)[-1]

    def _nearest(self, ready, prev):
        if prev is None:
            return 0
        best, bd = 0, math.inf
        row = self.W[prev]
        for idx, k in enumerate(ready):
            dist = row[self.seq.after(k, prev)[0]]
            if dist < bd - TOL:
                best, bd = idx, dist
        return best

    def evaluate(self, order: list[int]) -> Rollout:
        flat = self.seq.flatten(order)
        travel = path_travel(self.W, flat)
        reward = (self.upper - travel) / self.upper
        return Rollout(tuple(order), tuple(flat), travel, reward)

    def select(self, node: _Node) -> _Node:
        c = self.cfg.ucb_constant
        log_n = math.log(node.visits) if node.visits > 0 else 0.0
        best, bu = None, -math.inf
        for ch in node.children:
            if ch.exhausted:
                continue
            if ch.visits == 0:
                u = math.inf
            else:
                u = ch.total_reward / ch.visits + c * math.sqrt(log_n / ch.visits)
            if u > bu or (u == bu and ch.action < best.action):
                best, bu = ch, u
        return best

    def run(self, on_rollout: Callable[[Rollout], None] | None = None) -> SearchResult:
        cfg = self.cfg
        t0 = time.perf_counter()
        last_improvement = t0
        root = _Node(None, None, 0, _ready(self.cg, 0))
        tree_size = 1
        best: Rollout | None = None
        trace: list[TracePoint] = []
        it = 0
        stop = "max_iterations"
        while True:
            if cfg.max_iterations is not None and it >= cfg.max_iterations:
                stop = "max_iterations"
                break
            if root.exhausted:
                stop = "exhausted"
                break
            now = time.perf_counter()
            if it > 0 and cfg.wall_budget is not None and now - t0 >= cfg.wall_budget:
                stop = "wall_budget"
                break
            if it > 0 and cfg.stagnation_budget is not None and now - last_improvement >= cfg.stagnation_budget:
                stop = "stagnation"
                break
            it += 1

            node, prefix = root, []
            while not node.unexpanded and node.children:
                node = self.select(node)
                prefix.append(node.action)
            if node.unexpanded:
                a = node.unexpanded.pop(self.rng.randrange(len(node.unexpanded)))
                printed = node.printed | (1 << a)
                child = _Node(a, node, printed, _ready(self.cg, printed))
                node.children.append(child)
                tree_size += 1
                node = child
                prefix.append(a)

            rollout = self.evaluate(self.complete(prefix, node.printed))
            if on_rollout is not None:
                on_rollout(rollout)
            if best is None or rollout.travel < best.travel - TOL:
                best = rollout
                last_improvement = time.perf_counter()
                trace.append(TracePoint(it, (last_improvement - t0) * 1000.0, best.travel))

            n = node
            while n is not None:
                n.visits += 1
                n.total_reward += rollout.reward
                n = n.parent
            n = node
            while n is not None and not n.unexpanded and all(ch.exhausted for ch in n.children):
                n.exhausted = True
                n = n.parent

        if trace[-1].iteration != it:
            trace.append(TracePoint(it, (time.perf_counter() - t0) * 1000.0, best.travel))
        logger.debug("search stopped after %d iterations (%s), best travel %.6f", it, stop, best.travel)
        return SearchResult(best, trace, it, root.exhausted, stop, self.upper, tree_size)


def search(m: Model, d: DependencyGraph, cg: ClusteredGraph, cfg: SearchConfig | None = None,
           on_rollout: Callable[[Rollout], None] | None = None) -> SearchResult:
    """Run MCTS until a budget runs out or every cluster order has been tried.

    At least one iteration always runs, so ``result.best`` is a feasible
    rollout. ``on_rollout`` is called with every simulated rollout.
    """
    return _Search(m, d, cg, cfg or SearchConfig()).run(on_rollout)


def trace_to_csv(trace: Sequence[TracePoint], include_timing: bool = False) -> str:
    """Render ``iteration,elapsed_ms,best_travel_mm``; timing is left blank unless requested."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "elapsed_ms", "best_travel_mm"])
    for p in trace:
        w.writerow([p.iteration, f"{p.elapsed_ms:.3f}" if include_timing else "", repr(float(p.best_travel))])
    return buf.getvalue()


__all__ = ["SearchConfig", "Rollout", "TracePoint", "SearchResult", "search", "flatten",
           "evaluate_toolpath", "travel_upper_bound", "trace_to_csv"]

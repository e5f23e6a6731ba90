"""Dependency clustering into highly dependent subgraphs (HDS).

Contours that share (almost) all of their dependees and dependers are
grouped; inside such a group the cheapest order is essentially layer by
layer, so the search only has to order the groups.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .depgraph import DependencyGraph
from .exceptions import SameContour
from .geometry import TOL, Model, Point3
from .validation import check_fraction


def _ratio(common: int, own: int) -> float:
    # |common| <= |own|, so own == 0 forces common == 0: treat as fully shared.
    return 1.0 if own == 0 else common / own


def _gamma(phi_i: int, phi_j: int, psi_i: int, psi_j: int) -> float:
    pc = (phi_i & phi_j).bit_count()
    sc = (psi_i & psi_j).bit_count()
    down = min(_ratio(pc, phi_i.bit_count()), _ratio(pc, phi_j.bit_count()))
    up = min(_ratio(sc, psi_i.bit_count()), _ratio(sc, psi_j.bit_count()))
    return 0.5 * (down + up)


def degree_of_connectedness(d: DependencyGraph, i: int, j: int) -> float:
    """Mean of the dependee-sharing and depender-sharing ratios of two contours, in [0, 1]."""
    if i == j:
        raise SameContour(f"degree of connectedness needs two distinct contours, got {i} twice")
    anc, desc = d.ancestor_mask, d.descendant_mask
    return _gamma(anc[i], anc[j], desc[i], desc[j])


def _shares_any(d: DependencyGraph, i: int, j: int) -> bool:
    anc, desc = d.ancestor_mask, d.descendant_mask
    return bool(anc[i] & anc[j]) or bool(desc[i] & desc[j])


def _adjacent(d: DependencyGraph, i: int, j: int) -> bool:
    return j in d.succ[i] or i in d.succ[j]


def is_highly_dependent(d: DependencyGraph, members: Iterable[int], gamma_threshold: float = 0.5) -> bool:
    """True when every non-adjacent member pair with a common dependee or depender is highly connected."""
    members = sorted(set(members))
    if not members:
        raise ValueError("members must be non-empty")
    for i, j in combinations(members, 2):
        if _adjacent(d, i, j) or not _shares_any(d, i, j):
            continue
        if degree_of_connectedness(d, i, j) < gamma_threshold:
            return False
    return True


@dataclass(frozen=True)
class Cluster:
    id: int
    members: tuple[int, ...]
    depth_span: tuple[int, int]

    def __len__(self):
        return len(self.members)


class ClusteredGraph:
    """DAG over a partition of the contours, lifted from the contour-level edges."""

    def __init__(self, depgraph: DependencyGraph, groups: Iterable[Iterable[int]]):
        groups = [sorted(set(g)) for g in groups]
        depth = depgraph.depth
        groups.sort(key=lambda g: (min(depth[c] for c in g), g[0]))
        label = [-1] * depgraph.n
        for k, g in enumerate(groups):
            if not g:
                raise ValueError("empty cluster")
            for c in g:
                if label[c] != -1:
                    raise ValueError(f"contour {c} assigned to two clusters")
                label[c] = k
        if -1 in label:
            raise ValueError(f"contour {label.index(-1)} is not assigned to any cluster")
        self.depgraph = depgraph
        self.clusters = tuple(
            Cluster(k, tuple(g), (min(depth[c] for c in g), max(depth[c] for c in g)))
            for k, g in enumerate(groups))
        self.contour_to_cluster = tuple(label)
        succ = [set() for _ in groups]
        for a, b in depgraph.edges:
            ka, kb = label[a], label[b]
            if ka != kb:
                succ[ka].add(kb)
        self.succ = tuple(frozenset(s) for s in succ)
        pred = [set() for _ in groups]
        for a, s in enumerate(succ):
            for b in s:
                pred[b].add(a)
        self.pred = tuple(frozenset(p) for p in pred)
        self.pred_mask = tuple(sum(1 << a for a in p) for p in self.pred)
        self._check_acyclic()

    @classmethod
    def singletons(cls, depgraph: DependencyGraph) -> "ClusteredGraph":
        return cls(depgraph, ([c] for c in range(depgraph.n)))

    def _check_acyclic(self):
        indeg = [len(p) for p in self.pred]
        stack = [k for k, v in enumerate(indeg) if v == 0]
        seen = 0
        while stack:
            k = stack.pop()
            seen += 1
            for w in self.succ[k]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    stack.append(w)
        if seen != len(self.clusters):
            raise ValueError("clustered dependency graph contains a cycle")

    def __len__(self):
        return len(self.clusters)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((a, b) for a, s in enumerate(self.succ) for b in s)

    def is_topological(self, cluster_order: Sequence[int]) -> bool:
        if sorted(cluster_order) != list(range(len(self))):
            return False
        pos = {k: i for i, k in enumerate(cluster_order)}
        return all(pos[a] < pos[b] for a, b in self.edges)

    def to_dot(self, name: str = "clusters") -> str:
        lines = [f'digraph "{name}" {{']
        for h in self.clusters:
            lines.append(f'  h{h.id} [label="h{h.id}\\n{len(h)} contours\\nd={h.depth_span[0]}..{h.depth_span[1]}", '
                         f'style=filled, fillcolor="{cluster_color(h.id)}"];')
        for a, b in self.edges:
            lines.append(f"  h{a} -> h{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "clusters": [{"id": h.id, "members": list(h.members), "depth_span": list(h.depth_span),
                          "color": cluster_color(h.id)} for h in self.clusters],
            "edges": [list(e) for e in self.edges],
        }
        return json.dumps(doc, indent=2) + "\n"


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def cluster_color(k: int) -> str:
    return _PALETTE[k % len(_PALETTE)]


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _same_depth_groups(d: DependencyGraph, gamma_threshold: float) -> list[list[int]]:
    by_depth: dict[int, list[int]] = {}
    for c in range(d.n):
        by_depth.setdefault(d.depth[c], []).append(c)
    uf = _UnionFind(range(d.n))
    for depth in sorted(by_depth):
        for i, j in combinations(by_depth[depth], 2):
            # pairs with nothing in common are never candidates
            if _shares_any(d, i, j) and degree_of_connectedness(d, i, j) >= gamma_threshold:
                uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for c in range(d.n):
        groups.setdefault(uf.find(c), []).append(c)
    return list(groups.values())


def cluster_dependency_graph(d: DependencyGraph, gamma_threshold: float = 0.5) -> ClusteredGraph:
    """Group contours into highly dependent subgraphs.

    Same-depth contours are first joined when highly connected; dependency-adjacent
    clusters are then merged while their lifted connectedness stays at or above
    ``gamma_threshold`` and the cluster graph stays acyclic. Thresholds above 1
    disable merging entirely.
    """
    gamma_threshold = check_fraction(gamma_threshold, "gamma_threshold", upper=None)
    anc, desc = d.ancestor_mask, d.descendant_mask
    depth = d.depth
    succ_mask = [sum(1 << b for b in d.succ[a]) for a in range(d.n)]

    groups = _same_depth_groups(d, gamma_threshold)
    groups.sort(key=lambda g: (depth[g[0]], g[0]))
    label = [0] * d.n
    members, up, down, out_mask, min_depth = {}, {}, {}, {}, {}
    for k, g in enumerate(groups):
        members[k] = sum(1 << c for c in g)
        up[k] = 0
        down[k] = 0
        out_mask[k] = 0
        for c in g:
            label[c] = k
            up[k] |= anc[c]
            down[k] |= desc[c]
            out_mask[k] |= succ_mask[c]
        min_depth[k] = depth[g[0]]

    def lift(mask):
        ks = set()
        while mask:
            low = mask & -mask
            ks.add(label[low.bit_length() - 1])
            mask ^= low
        return ks

    csucc = {k: lift(out_mask[k]) - {k} for k in members}
    cpred = {k: set() for k in members}
    for a, s in csucc.items():
        for b in s:
            cpred[b].add(a)

    def key(k):
        return (min_depth[k], k)

    def reaches_indirectly(src, dst):
        stack = [w for w in csucc[src] if w != dst]
        seen = set(stack)
        while stack:
            v = stack.pop()
            if v == dst:
                return True
            for w in csucc[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False

    def lifted_gamma(a, b):
        outside = ~(members[a] | members[b])
        return _gamma(up[a] & outside, up[b] & outside, down[a] & outside, down[b] & outside)

    def mergeable(a, b):
        if lifted_gamma(a, b) < gamma_threshold:
            return False
        return not (reaches_indirectly(a, b) or reaches_indirectly(b, a))

    def merge(a, b):
        mb = members.pop(b)
        members[a] |= mb
        up[a] |= up.pop(b)
        down[a] |= down.pop(b)
        out_mask[a] |= out_mask.pop(b)
        min_depth[a] = min(min_depth[a], min_depth.pop(b))
        while mb:
            low = mb & -mb
            label[low.bit_length() - 1] = a
            mb ^= low
        for w in csucc.pop(b):
            cpred[w].discard(b)
            if w != a:
                cpred[w].add(a)
                csucc[a].add(w)
        for w in cpred.pop(b):
            csucc[w].discard(b)
            if w != a:
                csucc[w].add(a)
                cpred[a].add(w)
        csucc[a].discard(a)
        cpred[a].discard(a)
        csucc[a].discard(b)
        cpred[a].discard(b)

    if gamma_threshold <= 1.0:
        changed = True
        while changed:
            changed = False
            for a in sorted(members, key=key):
                if a not in members:
                    continue
                progress = True
                while progress:
                    progress = False
                    for b in sorted(csucc[a] | cpred[a], key=key):
                        if key(b) > key(a) and mergeable(a, b):
                            merge(a, b)
                            changed = progress = True
                            break

    final = []
    for k in members:
        m, cs = members[k], []
        while m:
            low = m & -m
            cs.append(low.bit_length() - 1)
            m ^= low
        final.append(cs)
    return ClusteredGraph(d, final)


class DependencyClusterer(BaseEstimator):
    """Estimator wrapper around :func:`cluster_dependency_graph`.

    Parameters
    ----------
    gamma : float, default=0.5
        Connectedness threshold. Larger values give more, smaller clusters;
        anything above 1 yields one cluster per contour.

    Attributes
    ----------
    clustered_graph_ : ClusteredGraph
    labels_ : ndarray of shape (n_contours,)
        Cluster id of every contour.
    n_clusters_ : int
    """

    def __init__(self, gamma=0.5):
        self.gamma = gamma

    def fit(self, depgraph: DependencyGraph, y=None):
        self.clustered_graph_ = cluster_dependency_graph(depgraph, self.gamma)
        self.labels_ = np.asarray(self.clustered_graph_.contour_to_cluster, dtype=int)
        self.n_clusters_ = len(self.clustered_graph_)
        return self

    def fit_predict(self, depgraph: DependencyGraph, y=None):
        return self.fit(depgraph).labels_


def cluster_stats(cg: ClusteredGraph) -> list[dict]:
    """Per-cluster size, depth span and pairwise connectedness summary."""
    d = cg.depgraph
    rows = []
    for h in cg.clusters:
        gammas = [degree_of_connectedness(d, i, j) for i, j in combinations(h.members, 2)
                  if not _adjacent(d, i, j) and _shares_any(d, i, j)]
        rows.append({
            "cluster": h.id,
            "size": len(h),
            "depth_min": h.depth_span[0],
            "depth_max": h.depth_span[1],
            "pairs": len(gammas),
            "gamma_min": min(gammas) if gammas else None,
            "gamma_mean": sum(gammas) / len(gammas) if gammas else None,
        })
    return rows


def _strata(members: Iterable[int], depth: Sequence[int]) -> list[list[int]]:
    by_depth: dict[int, list[int]] = {}
    for c in sorted(members):
        by_depth.setdefault(depth[c], []).append(c)
    return [by_depth[k] for k in sorted(by_depth)]


def _greedy_strata(strata, starts: np.ndarray, ends: np.ndarray, entry) -> tuple[int, ...]:
    pos = None if entry is None else np.asarray(entry, dtype=float)
    out = []
    for stratum in strata:
        left = list(stratum)
        while left:
            if pos is None:
                pick = left[0]
            else:
                dists = np.sqrt(((starts[left] - pos) ** 2).sum(axis=1))
                best = 0
                for k in range(1, len(left)):
                    if dists[k] < dists[best] - TOL:
                        best = k
                pick = left[best]
            left.remove(pick)
            out.append(pick)
            pos = ends[pick]
    return tuple(out)


def _endpoints(model: Model) -> tuple[np.ndarray, np.ndarray]:
    starts = np.array([c.start for c in model.contours], dtype=float).reshape(-1, 3)
    ends = np.array([c.end for c in model.contours], dtype=float).reshape(-1, 3)
    return starts, ends


class Sequencer:
    """Layer-by-layer greedy ordering inside clusters, memoised on the entry contour.

    Within a cluster contours are taken by ascending dependency depth; inside one
    depth the nearest start (from the current extruder position) goes next, ties
    to the lowest id.
    """

    def __init__(self, model: Model, cg: ClusteredGraph):
        self.model = model
        self.cg = cg
        self._starts, self._ends = _endpoints(model)
        depth = cg.depgraph.depth
        self._strata = [_strata(h.members, depth) for h in cg.clusters]
        self._cache: dict[tuple[int, int], tuple[int, ...]] = {}

    def from_point(self, cluster_id: int, entry: Point3 | None) -> tuple[int, ...]:
        return _greedy_strata(self._strata[cluster_id], self._starts, self._ends, entry)

    def after(self, cluster_id: int, prev_contour: int | None) -> tuple[int, ...]:
        """Sequence for ``cluster_id`` when the extruder just finished ``prev_contour``."""
        k = (cluster_id, -1 if prev_contour is None else prev_contour)
        seq = self._cache.get(k)
        if seq is None:
            entry = None if prev_contour is None else self._ends[prev_contour]
            seq = self._cache[k] = self.from_point(cluster_id, entry)
        return seq

    def flatten(self, cluster_order: Sequence[int], prev_contour: int | None = None) -> list[int]:
        out: list[int] = []
        for k in cluster_order:
            seq = self.after(k, prev_contour)
            out.extend(seq)
            prev_contour = seq[-1]
        return out


def intra_cluster_sequence(h: Cluster, m: Model, d: DependencyGraph, entry: Point3 | None = None) -> list[int]:
    """Order the contours of one cluster starting from extruder position ``entry``.

    With no entry point the lowest-id contour of the shallowest depth goes first.
    """
    starts, ends = _endpoints(m)
    return list(_greedy_strata(_strata(h.members, d.depth), starts, ends, entry))

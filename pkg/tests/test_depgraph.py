import random

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from waypath.baselines import plan_layerwise
from waypath.bench import generate_random_model, generate_towers
from waypath.depgraph import (DependencyGraph, ExtruderGeometry, build_dependency_graph, dependees, dependers,
                              depth_of, is_feasible_order)
from waypath.exceptions import NotAPermutation

from conftest import model_of

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def test_stacked_squares_depend():
    m = model_of((SQUARE, 0.2, True), (SQUARE, 0.4, True))
    d = build_dependency_graph(m, ExtruderGeometry(1.0, 0.0))
    assert d.edges == [(0, 1)]


def test_distant_towers_independent():
    m = generate_towers(2, 3, spacing=100)
    d = build_dependency_graph(m, ExtruderGeometry(1.0, 0.0))
    tower = {c.id: c.start.x // 50 for c in m.contours}
    assert all(tower[a] == tower[b] for a, b in d.edges)
    assert d.n_edges == 2 * 3


def test_three_stacked_keeps_transitive_edge():
    m = model_of((SQUARE, 0.2, True), (SQUARE, 0.4, True), (SQUARE, 0.6, True))
    assert build_dependency_graph(m).edges == [(0, 1), (0, 2), (1, 2)]


def test_cone_slope_widens_reach():
    a = [(0, 0), (1, 0)]
    b = [(3, 0), (4, 0)]
    m = model_of((a, 0.2, False), (b, 2.2, False))
    assert build_dependency_graph(m, ExtruderGeometry(1.0, 0.0)).n_edges == 0
    # clearance 2 <= 1 + 0.5 * 2
    assert build_dependency_graph(m, ExtruderGeometry(1.0, 0.5)).n_edges == 1


def test_geometry_validation():
    with pytest.raises(ValueError):
        ExtruderGeometry(-1.0, 0.0)
    with pytest.raises(ValueError):
        ExtruderGeometry(1.0, -0.1)


def test_depths(chain, diamond):
    assert depth_of(chain, 0) == 0
    assert depth_of(chain, 2) == 2
    assert depth_of(diamond, 3) == 2


def test_transitive_sets(chain, diamond):
    assert dependees(chain, 0) == set()
    assert dependees(chain, 2) == {0, 1}
    assert dependers(diamond, 0) == {1, 2, 3}


def test_feasibility_examples(chain):
    assert is_feasible_order(chain, [0, 1, 2])
    assert not is_feasible_order(chain, [1, 0, 2])
    with pytest.raises(NotAPermutation):
        is_feasible_order(chain, [0, 1, 1])
    with pytest.raises(NotAPermutation):
        is_feasible_order(chain, [0, 1])


def test_cycle_rejected():
    with pytest.raises(ValueError):
        DependencyGraph(2, [(0, 1), (1, 0)])


def random_dag(rng, n, p=0.3):
    return DependencyGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p])


def _simulate(d, order):
    done = set()
    for c in order:
        if not d.pred[c] <= done:
            return False
        done.add(c)
    return True


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 12))
def test_transitive_sets_match_networkx(seed, n):
    d = random_dag(random.Random(seed), n)
    g = nx.DiGraph(d.edges)
    g.add_nodes_from(range(n))
    for c in range(n):
        assert dependees(d, c) == nx.ancestors(g, c)
        assert dependers(d, c) == nx.descendants(g, c)
        # every path inside the ancestor set extends to c, so the longest one ends there
        longest = nx.dag_longest_path_length(g.subgraph(nx.ancestors(g, c) | {c}))
        assert depth_of(d, c) == longest
        assert (depth_of(d, c) == 0) == (not d.pred[c])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_feasibility_matches_simulation(seed):
    rng = random.Random(seed)
    d = random_dag(rng, rng.randint(1, 9))
    for _ in range(20):
        order = list(range(d.n))
        rng.shuffle(order)
        assert is_feasible_order(d, order) == _simulate(d, order)


@pytest.mark.parametrize("seed", range(25))
def test_generated_graph_invariants(seed):
    m = generate_random_model(25, layers=5, seed=seed)
    d = build_dependency_graph(m)
    assert len(d.topological_order) == d.n
    for a, b in d.edges:
        assert m.contours[a].layer < m.contours[b].layer
        assert depth_of(d, a) < depth_of(d, b)
    for a in range(d.n):
        for b in dependers(d, a):
            assert a in dependees(d, b)


@pytest.mark.parametrize("seed", range(100))
def test_layerwise_feasible(seed):
    m = generate_random_model(random.Random(seed).randint(1, 40), layers=6, seed=seed)
    d = build_dependency_graph(m)
    assert is_feasible_order(d, plan_layerwise(m, d).order)


def test_dot_export(diamond):
    dot = diamond.to_dot()
    assert dot.startswith("digraph")
    assert dot.count("->") == 4

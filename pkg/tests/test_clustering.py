import json
import random
from itertools import combinations

import networkx as nx
import pytest
from sklearn.base import clone

from waypath.bench import generate_random_model, generate_stacks, generate_three_stacks, generate_towers
from waypath.clustering import (Cluster, ClusteredGraph, DependencyClusterer, cluster_dependency_graph,
                                cluster_stats, degree_of_connectedness, intra_cluster_sequence, is_highly_dependent)
from waypath.depgraph import DependencyGraph, build_dependency_graph, is_feasible_order
from waypath.exceptions import SameContour
from waypath.mcts import flatten

from conftest import model_of

GAMMAS = (0.1, 0.3, 0.5, 0.7, 0.9)


def _gamma_oracle(d, i, j):
    """Connectedness computed directly from python sets."""
    def ratio(common, own):
        return 1.0 if not own else len(common) / len(own)
    pi, pj = d.dependees(i), d.dependees(j)
    si, sj = d.dependers(i), d.dependers(j)
    down = min(ratio(pi & pj, pi), ratio(pi & pj, pj))
    up = min(ratio(si & sj, si), ratio(si & sj, sj))
    return (down + up) / 2


def test_identical_neighbourhoods_fully_connected():
    # a=0, b=1, i=2, j=3, x=4
    d = DependencyGraph(5, [(0, 2), (1, 2), (0, 3), (1, 3), (2, 4), (3, 4)])
    assert degree_of_connectedness(d, 2, 3) == 1.0


def test_partial_dependee_overlap():
    # c=5 feeds i only
    d = DependencyGraph(6, [(0, 2), (1, 2), (5, 2), (0, 3), (1, 3), (2, 4), (3, 4)])
    assert degree_of_connectedness(d, 2, 3) == pytest.approx(5 / 6)


def test_roots_with_disjoint_dependers():
    d = DependencyGraph(4, [(0, 2), (1, 3)])
    assert degree_of_connectedness(d, 0, 1) == 0.5


def test_same_contour_rejected(diamond):
    with pytest.raises(SameContour):
        degree_of_connectedness(diamond, 1, 1)


@pytest.mark.parametrize("seed", range(15))
def test_gamma_symmetric_and_matches_oracle(seed):
    m = generate_random_model(14, layers=4, seed=seed)
    d = build_dependency_graph(m)
    for i, j in combinations(range(d.n), 2):
        g = degree_of_connectedness(d, i, j)
        assert g == degree_of_connectedness(d, j, i)
        assert g == pytest.approx(_gamma_oracle(d, i, j), abs=1e-12)
        assert 0.0 <= g <= 1.0
        if d.dependees(i) == d.dependees(j) and d.dependers(i) == d.dependers(j):
            assert g == 1.0


def test_highly_dependent_examples():
    d = build_dependency_graph(generate_stacks([(4, 2)]))
    assert is_highly_dependent(d, [0])
    assert is_highly_dependent(d, range(8))
    # base 0 carrying two unrelated two-high stacks 1->2 and 3->4
    d = DependencyGraph(5, [(0, 1), (1, 2), (0, 3), (3, 4)])
    assert degree_of_connectedness(d, 1, 4) == 0.25
    assert not is_highly_dependent(d, range(5), 0.5)


def test_bipartite_stack_is_one_cluster():
    d = build_dependency_graph(generate_stacks([(4, 2)]))
    assert d.n_edges == 16
    cg = cluster_dependency_graph(d, 0.5)
    assert len(cg) == 1


def test_separate_towers_stay_apart():
    d = build_dependency_graph(generate_towers(2, 5))
    cg = cluster_dependency_graph(d, 0.5)
    assert len(cg) == 2 and cg.edges == []


def test_three_stacks():
    m = generate_three_stacks()
    assert len(m) == 16
    cg = cluster_dependency_graph(build_dependency_graph(m), 0.5)
    assert sorted(len(h) for h in cg.clusters) == [4, 6, 6]


def test_towers_give_k_clusters():
    for k in (1, 3, 4, 6):
        cg = cluster_dependency_graph(build_dependency_graph(generate_towers(k, 6)), 0.5)
        assert len(cg) == k


def test_threshold_above_one_gives_singletons():
    d = build_dependency_graph(generate_stacks([(4, 2)]))
    assert len(cluster_dependency_graph(d, 1.5)) == 8
    with pytest.raises(ValueError):
        cluster_dependency_graph(d, -0.1)


def _check_structure(d, cg):
    seen = sorted(c for h in cg.clusters for c in h.members)
    assert seen == list(range(d.n))
    lab = cg.contour_to_cluster
    expected = {(lab[a], lab[b]) for a, b in d.edges if lab[a] != lab[b]}
    assert set(cg.edges) == expected
    assert nx.is_directed_acyclic_graph(nx.DiGraph(cg.edges))
    for h in cg.clusters:
        depths = [d.depth[c] for c in h.members]
        assert h.depth_span == (min(depths), max(depths))


@pytest.mark.parametrize("seed", range(30))
def test_partition_and_lifted_dag(seed):
    rng = random.Random(seed)
    m = generate_random_model(rng.randint(1, 40), layers=rng.randint(1, 6), seed=seed)
    d = build_dependency_graph(m)
    for g in GAMMAS + (1.0,):
        _check_structure(d, cluster_dependency_graph(d, g))


@pytest.mark.parametrize("seed", range(30))
def test_flatten_random_topological_orders_is_feasible(seed):
    rng = random.Random(seed)
    m = generate_random_model(30, layers=5, seed=seed)
    d = build_dependency_graph(m)
    cg = cluster_dependency_graph(d, 0.5)
    g = nx.DiGraph(cg.edges)
    g.add_nodes_from(range(len(cg)))
    orders = list(nx.all_topological_sorts(g)) if len(cg) <= 6 else []
    for _ in range(10):
        # random topological order by repeatedly drawing a ready cluster
        order, done = [], set()
        while len(order) < len(cg):
            ready = [k for k in range(len(cg)) if k not in done and cg.pred[k] <= done]
            k = rng.choice(ready)
            order.append(k)
            done.add(k)
        orders.append(order)
    for order in orders:
        assert cg.is_topological(order)
        assert is_feasible_order(d, flatten(cg, order, m, d))


@pytest.mark.parametrize("seed", range(20))
def test_cluster_count_monotone_in_threshold(seed):
    d = build_dependency_graph(generate_random_model(30, layers=5, seed=seed))
    counts = [len(cluster_dependency_graph(d, g)) for g in GAMMAS]
    assert counts == sorted(counts)


def test_single_contour_sequence():
    m = model_of(([(0, 0), (1, 0)], 0.2, False))
    d = build_dependency_graph(m)
    assert intra_cluster_sequence(Cluster(0, (0,), (0, 0)), m, d) == [0]


def test_greedy_nearest_inside_one_depth():
    m = model_of(([(0, 0), (0, 1)], 0.2, False), ([(10, 0), (10, 1)], 0.2, False), ([(2, 0), (2, 1)], 0.2, False))
    d = build_dependency_graph(m)
    h = Cluster(0, (0, 1, 2), (0, 0))
    assert intra_cluster_sequence(h, m, d, entry=(0.0, 0.0, 0.2)) == [0, 2, 1]
    assert intra_cluster_sequence(h, m, d, entry=(10.0, 0.0, 0.2)) == [1, 2, 0]


def test_depth_strata_respected():
    m = generate_stacks([(3, 3)])
    d = build_dependency_graph(m)
    cg = cluster_dependency_graph(d)
    seq = intra_cluster_sequence(cg.clusters[0], m, d, entry=(50.0, 50.0, 0.0))
    depths = [d.depth[c] for c in seq]
    assert depths == sorted(depths)
    assert is_feasible_order(d, seq)


def test_clustered_graph_rejects_bad_partitions(chain):
    with pytest.raises(ValueError):
        ClusteredGraph(chain, [[0, 1], [1, 2]])
    with pytest.raises(ValueError):
        ClusteredGraph(chain, [[0, 1]])
    with pytest.raises(ValueError):
        ClusteredGraph(chain, [[0, 2], [1]])


def test_estimator_and_exports():
    d = build_dependency_graph(generate_three_stacks())
    est = DependencyClusterer(gamma=0.5)
    labels = est.fit_predict(d)
    assert est.n_clusters_ == 3 and len(labels) == 16
    assert clone(est).get_params() == {"gamma": 0.5}
    doc = json.loads(est.clustered_graph_.to_json())
    assert len(doc["clusters"]) == 3 and all(c["color"].startswith("#") for c in doc["clusters"])
    assert est.clustered_graph_.to_dot().count("->") == 0
    stats = cluster_stats(est.clustered_graph_)
    assert [s["size"] for s in stats] == [len(h) for h in est.clustered_graph_.clusters]

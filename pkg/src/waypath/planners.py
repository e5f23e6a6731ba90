"""scikit-learn style estimators wrapping every planner.

Each planner is fitted on a :class:`~waypath.geometry.Model` (optionally with a
prebuilt dependency graph) and exposes the result as ``toolpath_``,
``order_`` and ``travel_``::

    >>> planner = MCTSPlanner(seed=1, max_iterations=500).fit(model)
    >>> planner.travel_
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from .baselines import plan_exact, plan_greedy, plan_layerwise, plan_local_search
from .clustering import cluster_dependency_graph
from .depgraph import DependencyGraph, ExtruderGeometry, build_dependency_graph
from .mcts import SearchConfig, search
from .objective import Toolpath, make_toolpath
from .validation import check_depgraph, check_model


class BasePlanner(BaseEstimator):
    """Shared ``fit`` plumbing; subclasses implement ``_plan(model, depgraph)``."""

    planner_name = ""

    def _geometry(self) -> ExtruderGeometry:
        return ExtruderGeometry(self.nozzle_clearance_radius, self.cone_slope)

    def fit(self, model, depgraph: DependencyGraph | None = None):
        model = check_model(model)
        if depgraph is None:
            depgraph = build_dependency_graph(model, self._geometry())
        self.depgraph_ = check_depgraph(depgraph, model)
        self.toolpath_ = self._plan(model, self.depgraph_)
        self.order_ = np.asarray(self.toolpath_.order, dtype=int)
        self.travel_ = self.toolpath_.travel
        return self

    def fit_predict(self, model, depgraph: DependencyGraph | None = None):
        return self.fit(model, depgraph).order_

    def _plan(self, model, depgraph) -> Toolpath:
        raise NotImplementedError


class LayerwisePlanner(BasePlanner):
    planner_name = "layerwise"

    def __init__(self, nozzle_clearance_radius=1.0, cone_slope=0.5):
        self.nozzle_clearance_radius = nozzle_clearance_radius
        self.cone_slope = cone_slope

    def _plan(self, model, depgraph):
        return plan_layerwise(model, depgraph)


class GreedyPlanner(BasePlanner):
    planner_name = "greedy"

    def __init__(self, nozzle_clearance_radius=1.0, cone_slope=0.5):
        self.nozzle_clearance_radius = nozzle_clearance_radius
        self.cone_slope = cone_slope

    def _plan(self, model, depgraph):
        return plan_greedy(model, depgraph)


class LocalSearchPlanner(BasePlanner):
    planner_name = "local"

    def __init__(self, seed=0, max_iter=10_000, time_budget=None, nozzle_clearance_radius=1.0, cone_slope=0.5):
        self.seed = seed
        self.max_iter = max_iter
        self.time_budget = time_budget
        self.nozzle_clearance_radius = nozzle_clearance_radius
        self.cone_slope = cone_slope

    def _plan(self, model, depgraph):
        return plan_local_search(model, depgraph, seed=self.seed, budget=self.max_iter, time_budget=self.time_budget)


class ExactPlanner(BasePlanner):
    planner_name = "exact"

    def __init__(self, limit=9, nozzle_clearance_radius=1.0, cone_slope=0.5):
        self.limit = limit
        self.nozzle_clearance_radius = nozzle_clearance_radius
        self.cone_slope = cone_slope

    def _plan(self, model, depgraph):
        return plan_exact(model, depgraph, limit=self.limit)


class MCTSPlanner(BasePlanner):
    """Monte Carlo Tree Search over the clustered dependency graph.

    Parameters
    ----------
    gamma : float, default=0.5
        Clustering threshold; values above 1 keep one cluster per contour.
    ucb_constant : float, default=sqrt(2)
    seed : int, default=0
    max_iterations, wall_budget, stagnation_budget
        Stopping rules; budgets in seconds, ``None`` disables a rule. The
        search also stops once every cluster order has been tried.
    rollout_policy : {"uniform", "greedy_biased"}
    greedy_bias : float, default=0.0
        Probability of taking the nearest ready cluster in a greedy-biased rollout.

    Attributes
    ----------
    clustered_graph_ : ClusteredGraph
    search_result_ : SearchResult
    trace_ : list of TracePoint
    n_clusters_ : int
    n_iter_ : int
    """

    planner_name = "mcts"

    def __init__(self, gamma=0.5, ucb_constant=math.sqrt(2), seed=0, max_iterations=None, wall_budget=None,
                 stagnation_budget=300.0, rollout_policy="uniform", greedy_bias=0.0,
                 nozzle_clearance_radius=1.0, cone_slope=0.5):
        self.gamma = gamma
        self.ucb_constant = ucb_constant
        self.seed = seed
        self.max_iterations = max_iterations
        self.wall_budget = wall_budget
        self.stagnation_budget = stagnation_budget
        self.rollout_policy = rollout_policy
        self.greedy_bias = greedy_bias
        self.nozzle_clearance_radius = nozzle_clearance_radius
        self.cone_slope = cone_slope

    def _config(self) -> SearchConfig:
        return SearchConfig(ucb_constant=self.ucb_constant, seed=self.seed, max_iterations=self.max_iterations,
                            wall_budget=self.wall_budget, stagnation_budget=self.stagnation_budget,
                            rollout_policy=self.rollout_policy, greedy_bias=self.greedy_bias)

    def _plan(self, model, depgraph):
        cfg = self._config()
        self.clustered_graph_ = cluster_dependency_graph(depgraph, self.gamma)
        self.n_clusters_ = len(self.clustered_graph_)
        self.search_result_ = search(model, depgraph, self.clustered_graph_, cfg)
        self.trace_ = self.search_result_.trace
        self.n_iter_ = self.search_result_.iterations
        best = self.search_result_.best
        return make_toolpath(model, depgraph, best.flattened, self.planner_name)


PLANNERS = {cls.planner_name: cls for cls in
            (LayerwisePlanner, GreedyPlanner, LocalSearchPlanner, ExactPlanner, MCTSPlanner)}


def get_planner(name: str, **params) -> BasePlanner:
    """Instantiate a planner by name, silently dropping parameters it does not take."""
    try:
        cls = PLANNERS[name]
    except KeyError:
        raise ValueError(f"unknown planner {name!r}; choose from {sorted(PLANNERS)}") from None
    accepted = cls().get_params()
    return cls(**{k: v for k, v in params.items() if k in accepted})

"""Synthetic model families and the planner comparison harness."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .depgraph import ExtruderGeometry, build_dependency_graph
from .exceptions import TooLarge
from .geometry import Model
from .planners import get_planner

logger = logging.getLogger(__name__)

LAYER_HEIGHT = 0.2
PLANNER_NAMES = ("layerwise", "greedy", "local", "mcts", "exact")


def _z(layer: int, layer_height: float = LAYER_HEIGHT) -> float:
    return round((layer + 1) * layer_height, 6)


def _square(x: float, y: float, side: float, start_corner: int = 0) -> list[tuple[float, float]]:
    corners = [(x, y), (x + side, y), (x + side, y + side), (x, y + side)]
    return corners[start_corner:] + corners[:start_corner]


def generate_towers(k: int, layers: int, spacing: float = 100.0, side: float = 10.0, seed: int = 0,
                    layer_height: float = LAYER_HEIGHT, name: str | None = None) -> Model:
    """``k`` square towers on a grid, one closed perimeter per tower per layer.

    Contour ids run layer by layer, as a slicer would emit them. The seed picks
    each tower's start corner.
    """
    if k < 1 or layers < 1:
        raise ValueError("need at least one tower and one layer")
    rng = random.Random(seed)
    cols = math.ceil(math.sqrt(k))
    corners = [rng.randrange(4) for _ in range(k)]
    items = []
    for layer in range(layers):
        for t in range(k):
            x, y = (t % cols) * spacing, (t // cols) * spacing
            items.append((_square(x, y, side, corners[t]), _z(layer, layer_height), True))
    return Model.from_contours(items, name or f"towers_k{k}_l{layers}_s{seed}")


def generate_stacks(stacks, spacing: float = 100.0, side: float = 10.0, inset: float = 0.5,
                    layer_height: float = LAYER_HEIGHT, name: str = "stacks") -> Model:
    """Independent stacks of nested square perimeters.

    ``stacks`` is a list of ``(perimeters_per_layer, layers)``. Perimeters of one
    stack overlap in XY, so every contour depends on every contour below it in
    the same stack (a complete bipartite pattern between consecutive layers).
    """
    items = []
    for s, (parts, layers) in enumerate(stacks):
        x0 = s * spacing
        for layer in range(layers):
            for p in range(parts):
                off = p * inset
                items.append((_square(x0 + off, off, side - 2 * off), _z(layer, layer_height), True))
    return Model.from_contours(items, name)


def generate_three_stacks() -> Model:
    """16 contours in three independent stacks (6 + 6 + 4)."""
    return generate_stacks([(2, 3), (2, 3), (2, 2)], name="three_stacks")


def generate_random_model(n: int, layers: int = 4, seed: int = 0, bed: float = 60.0,
                          layer_height: float = LAYER_HEIGHT, name: str | None = None) -> Model:
    """Random rectangles (mostly closed) and L-shaped open paths on random layers."""
    if n < 1 or layers < 1:
        raise ValueError("need at least one contour and one layer")
    rng = random.Random(seed)
    items = []
    for _ in range(n):
        layer = rng.randrange(layers)
        w, h = round(rng.uniform(2, bed / 4), 3), round(rng.uniform(2, bed / 4), 3)
        x, y = round(rng.uniform(0, bed - w), 3), round(rng.uniform(0, bed - h), 3)
        corner = rng.randrange(4)
        pts = [(x, y), (x + w, y), (x + w, y + h), (x, y + h)]
        pts = pts[corner:] + pts[:corner]
        if rng.random() < 0.8:
            items.append((pts, _z(layer, layer_height), True))
        else:
            items.append((pts[:3], _z(layer, layer_height), False))
    return Model.from_contours(items, name or f"random_n{n}_l{layers}_s{seed}")


# ---------------------------------------------------------------- harness

@dataclass
class BenchConfig:
    geometry: ExtruderGeometry = field(default_factory=ExtruderGeometry)
    gamma: float = 0.5
    seed: int = 0
    mcts_iterations: int | None = 2000
    mcts_wall_budget: float | None = None
    mcts_stagnation_budget: float | None = 300.0
    local_max_iter: int | None = 10_000
    exact_limit: int = 9
    planners: tuple[str, ...] = PLANNER_NAMES


@dataclass
class ModelRow:
    name: str
    contours: int
    clusters: int
    seed: int
    travel: dict[str, float | None]
    reduction_pct: dict[str, float | None]
    iterations: int | None
    wall_ms: dict[str, float]
    errors: dict[str, str]


def reduction_pct(layerwise_t: float | None, planner_t: float | None) -> float | None:
    if layerwise_t is None or planner_t is None:
        return None
    if layerwise_t == 0:
        return 0.0
    return 100.0 * (layerwise_t - planner_t) / layerwise_t


@dataclass
class BenchmarkReport:
    rows: list[ModelRow]
    planners: tuple[str, ...]

    @property
    def median_reduction(self) -> dict[str, float | None]:
        out = {}
        for p in self.planners:
            vals = [r.reduction_pct[p] for r in self.rows if r.reduction_pct.get(p) is not None]
            out[p] = statistics.median(vals) if vals else None
        return out

    def to_csv(self, include_timing: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["model", "contours", "clusters", "planner", "travel_mm", "reduction_pct", "iterations",
                  "seed", "error"]
        if include_timing:
            header.append("wall_ms")
        w.writerow(header)
        for r in self.rows:
            for p in self.planners:
                t, red = r.travel.get(p), r.reduction_pct.get(p)
                row = [r.name, r.contours, r.clusters, p,
                       "" if t is None else repr(t), "" if red is None else repr(red),
                       r.iterations if p == "mcts" and r.iterations is not None else "",
                       r.seed, r.errors.get(p, "")]
                if include_timing:
                    row.append(f"{r.wall_ms.get(p, 0.0):.3f}")
                w.writerow(row)
        return buf.getvalue()

    def to_json(self, include_timing: bool = False) -> str:
        rows = []
        for r in self.rows:
            d = asdict(r)
            if not include_timing:
                d.pop("wall_ms")
            rows.append(d)
        doc = {"planners": list(self.planners), "rows": rows,
               "aggregate": {"median_reduction_pct": self.median_reduction}}
        return json.dumps(doc, indent=2) + "\n"


def _params(cfg: BenchConfig) -> dict:
    g = cfg.geometry
    return dict(nozzle_clearance_radius=g.nozzle_clearance_radius, cone_slope=g.cone_slope, seed=cfg.seed,
                gamma=cfg.gamma, max_iterations=cfg.mcts_iterations, wall_budget=cfg.mcts_wall_budget,
                stagnation_budget=cfg.mcts_stagnation_budget, max_iter=cfg.local_max_iter, limit=cfg.exact_limit)


def run_model(model: Model, cfg: BenchConfig) -> ModelRow:
    """Run every configured planner on one model; a failing planner is recorded, not raised."""
    d = build_dependency_graph(model, cfg.geometry)
    params = _params(cfg)
    travel, wall, errors = {}, {}, {}
    clusters, iterations = len(model), None
    for name in cfg.planners:
        if name == "exact" and len(model) > cfg.exact_limit:
            travel[name] = None
            continue
        t0 = time.perf_counter()
        try:
            planner = get_planner(name, **params).fit(model, d)
        except (TooLarge, ValueError, ArithmeticError, RuntimeError) as exc:
            travel[name] = None
            errors[name] = f"{type(exc).__name__}: {exc}"
            logger.warning("%s failed on %s: %s", name, model.name, exc)
            continue
        finally:
            wall[name] = (time.perf_counter() - t0) * 1000.0
        travel[name] = planner.travel_
        if name == "mcts":
            clusters, iterations = planner.n_clusters_, planner.n_iter_
    base = travel.get("layerwise")
    reductions = {p: reduction_pct(base, travel.get(p)) for p in cfg.planners}
    return ModelRow(model.name, len(model), clusters, cfg.seed, travel, reductions, iterations, wall, errors)


def _run_model_args(args):
    return run_model(*args)


def run_comparison(models, cfg: BenchConfig | None = None, jobs: int = 1) -> BenchmarkReport:
    """Compare all planners on ``models``; rows come back sorted by model name."""
    cfg = cfg or BenchConfig()
    models = list(models)
    if not models:
        raise ValueError("need at least one model")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_model_args, [(m, cfg) for m in models]))
    else:
        rows = [run_model(m, cfg) for m in models]
    rows.sort(key=lambda r: r.name)
    return BenchmarkReport(rows, tuple(cfg.planners))

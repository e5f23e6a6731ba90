"""Command line entry point: ``waypath {plan,cluster,ingest,bench}``.

Exit codes: 0 success, 1 bad flags or an over-limit request, 2 unreadable
input, 3 an infeasible toolpath (internal error guard).
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import bench as benchmod
from .clustering import ClusteredGraph, cluster_color, cluster_dependency_graph, cluster_stats
from .depgraph import ExtruderGeometry, build_dependency_graph
from .exceptions import InfeasibleToolpath, InvalidGeometry, ParseError, TooLarge
from .mcts import trace_to_csv
from .model_io import (GcodeParams, emit_gcode, emit_layer_svg, emit_native, load_model, parse_gcode,
                       svg_filename)
from .planners import PLANNERS, get_planner

logger = logging.getLogger("waypath")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return conv


def _nonneg(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v >= 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be a finite non-negative number: {text!r}")
    return v


def _unit(text):
    v = _nonneg(text)
    if v > 1:
        raise argparse.ArgumentTypeError(f"must be in [0, 1]: {text!r}")
    return v


def _add_common(p):
    p.add_argument("--gamma", type=_nonneg, default=0.5, help="clustering threshold (default 0.5; >1 disables merging)")
    p.add_argument("--clearance", type=_nonneg, default=1.0, help="nozzle clearance radius in mm")
    p.add_argument("--cone-slope", type=_nonneg, default=0.5, help="extra clearance per mm of height difference")


def _add_search(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ucb", type=_nonneg, default=math.sqrt(2), help="UCB exploration constant")
    p.add_argument("--iterations", type=_positive(int), default=None, help="MCTS iteration cap")
    p.add_argument("--wall-budget", type=_positive(float), default=None, help="MCTS wall-clock budget in seconds")
    p.add_argument("--stagnation-budget", type=_positive(float), default=300.0,
                   help="stop MCTS after this many seconds without improvement (default 300)")
    p.add_argument("--rollout-policy", choices=("uniform", "greedy_biased"), default="uniform")
    p.add_argument("--greedy-bias", type=_unit, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="waypath", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("plan", help="plan a toolpath for a model")
    p.add_argument("input", help="model file (.json native or .gcode)")
    p.add_argument("--planner", choices=sorted(PLANNERS), default="mcts")
    _add_common(p)
    _add_search(p)
    p.add_argument("--exact-limit", type=_positive(int), default=9)
    p.add_argument("--local-iterations", type=_positive(int), default=10_000)
    p.add_argument("--gcode", type=Path, help="write the planned G-code here")
    p.add_argument("--svg-dir", type=Path, help="write one SVG per layer into this directory")
    p.add_argument("--dot", type=Path, help="write the dependency graph as DOT")
    p.add_argument("--trace", type=Path, help="write the MCTS convergence trace as CSV")
    p.add_argument("--trace-timing", action="store_true", help="fill the elapsed_ms column of the trace")
    p.add_argument("--travel-feed", type=_positive(float), default=6000.0)
    p.add_argument("--print-feed", type=_positive(float), default=1800.0)
    p.add_argument("--extrude-per-mm", type=_positive(float), default=0.05)

    p = sub.add_parser("cluster", help="inspect the dependency clustering of a model")
    p.add_argument("input")
    _add_common(p)
    p.add_argument("--dot", type=Path, help="write the clustered graph as DOT")
    p.add_argument("--json", type=Path, help="write clusters (with colours) as JSON")
    p.add_argument("--svg-dir", type=Path, help="write per-layer SVGs coloured by cluster")

    p = sub.add_parser("ingest", help="convert G-code to the native JSON format")
    p.add_argument("input")
    p.add_argument("-o", "--output", type=Path, help="output path (default stdout)")
    p.add_argument("--name", help="model name (default: file stem)")

    p = sub.add_parser("bench", help="compare planners on synthetic or supplied models")
    p.add_argument("inputs", nargs="*", help="extra model files to include")
    p.add_argument("--family", choices=("towers", "random", "stacks", "none"), default="towers")
    p.add_argument("--k", type=_positive(int), default=4, help="towers per model")
    p.add_argument("--layers", type=_positive(int), default=20)
    p.add_argument("--spacing", type=_positive(float), default=100.0)
    p.add_argument("--side", type=_positive(float), default=10.0)
    p.add_argument("--n", type=_positive(int), default=8, help="contours per random model")
    p.add_argument("--count", type=_positive(int), default=1, help="models per family (seeds seed..seed+count-1)")
    _add_common(p)
    _add_search(p)
    p.add_argument("--planners", default=",".join(benchmod.PLANNER_NAMES))
    p.add_argument("--exact-limit", type=_positive(int), default=9)
    p.add_argument("--local-iterations", type=_positive(int), default=10_000)
    p.add_argument("--out-dir", type=Path, default=Path("."))
    p.add_argument("--jobs", type=_positive(int), default=1)
    p.add_argument("--timings", action="store_true", help="include wall-clock columns in the report files")
    return parser


def _geometry(args) -> ExtruderGeometry:
    return ExtruderGeometry(args.clearance, args.cone_slope)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="ascii")


def cmd_plan(args) -> int:
    model = load_model(args.input)
    d = build_dependency_graph(model, _geometry(args))
    params = dict(gamma=args.gamma, ucb_constant=args.ucb, seed=args.seed, max_iterations=args.iterations,
                  wall_budget=args.wall_budget, stagnation_budget=args.stagnation_budget,
                  rollout_policy=args.rollout_policy, greedy_bias=args.greedy_bias, limit=args.exact_limit,
                  max_iter=args.local_iterations, nozzle_clearance_radius=args.clearance,
                  cone_slope=args.cone_slope)
    planner = get_planner(args.planner, **params)
    t0 = time.perf_counter()
    planner.fit(model, d)
    logger.info("planning took %.1f ms", (time.perf_counter() - t0) * 1000.0)
    tp = planner.toolpath_
    if not d.is_feasible_order(tp.order):
        raise InfeasibleToolpath(f"{args.planner} produced an infeasible order")
    cg = getattr(planner, "clustered_graph_", None) or cluster_dependency_graph(d, args.gamma)

    if args.gcode:
        params = GcodeParams(args.travel_feed, args.print_feed, args.extrude_per_mm)
        _write(args.gcode, emit_gcode(tp, model, params, d))
    if args.svg_dir:
        for layer in range(len(model.layer_heights)):
            _write(args.svg_dir / svg_filename(model, layer), emit_layer_svg(tp, model, layer, d=d))
    if args.dot:
        _write(args.dot, d.to_dot(model.name))
    if args.trace:
        if args.planner != "mcts":
            raise UsageError("--trace is only available with --planner mcts")
        _write(args.trace, trace_to_csv(planner.trace_, include_timing=args.trace_timing))
    print(f"model={model.name} planner={args.planner} contours={len(model)} clusters={len(cg)} "
          f"travel_mm={tp.travel:.6f}")
    return 0


def _fmt_gamma(v):
    return "-" if v is None else f"{v:.4f}"


def cmd_cluster(args) -> int:
    model = load_model(args.input)
    d = build_dependency_graph(model, _geometry(args))
    cg = cluster_dependency_graph(d, args.gamma)
    print(f"model={model.name} contours={len(model)} edges={d.n_edges} clusters={len(cg)} gamma={args.gamma}")
    for row, h in zip(cluster_stats(cg), cg.clusters):
        members = ",".join(str(c) for c in h.members)
        print(f"cluster={row['cluster']} size={row['size']} depth={row['depth_min']}..{row['depth_max']} "
              f"pairs={row['pairs']} gamma_min={_fmt_gamma(row['gamma_min'])} "
              f"gamma_mean={_fmt_gamma(row['gamma_mean'])} members={members}")
    if args.dot:
        _write(args.dot, cg.to_dot(model.name))
    if args.json:
        _write(args.json, cg.to_json())
    if args.svg_dir:
        from .baselines import plan_layerwise

        tp = plan_layerwise(model, d)
        colors = {c: cluster_color(cg.contour_to_cluster[c]) for c in range(len(model))}
        for layer in range(len(model.layer_heights)):
            _write(args.svg_dir / svg_filename(model, layer), emit_layer_svg(tp, model, layer, colors, d))
    return 0


def cmd_ingest(args) -> int:
    path = Path(args.input)
    model = parse_gcode(path.read_bytes(), name=args.name or path.stem)
    text = emit_native(model)
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    planners = tuple(p.strip() for p in args.planners.split(",") if p.strip())
    unknown = set(planners) - set(PLANNERS)
    if unknown or "layerwise" not in planners:
        raise UsageError(f"--planners must name known planners and include layerwise (unknown: {sorted(unknown)})")
    models = []
    seeds = range(args.seed, args.seed + args.count)
    if args.family == "towers":
        models += [benchmod.generate_towers(args.k, args.layers, args.spacing, args.side, seed=s) for s in seeds]
    elif args.family == "random":
        models += [benchmod.generate_random_model(args.n, args.layers, seed=s) for s in seeds]
    elif args.family == "stacks":
        models += [benchmod.generate_stacks([(2, args.layers)] * args.k, args.spacing, args.side,
                                            name=f"stacks_k{args.k}_l{args.layers}")]
    models += [load_model(p) for p in args.inputs]
    if not models:
        raise UsageError("no models: pick a --family or pass input files")
    cfg = benchmod.BenchConfig(geometry=_geometry(args), gamma=args.gamma, seed=args.seed,
                               mcts_iterations=args.iterations, mcts_wall_budget=args.wall_budget,
                               mcts_stagnation_budget=args.stagnation_budget, local_max_iter=args.local_iterations,
                               exact_limit=args.exact_limit, planners=planners)
    t0 = time.perf_counter()
    report = benchmod.run_comparison(models, cfg, jobs=args.jobs)
    logger.info("bench took %.1f ms", (time.perf_counter() - t0) * 1000.0)
    _write(args.out_dir / "report.csv", report.to_csv(args.timings))
    _write(args.out_dir / "report.json", report.to_json(args.timings))
    for p, v in report.median_reduction.items():
        print(f"median_reduction_pct planner={p} value={'-' if v is None else f'{v:.3f}'}")
    return 0


COMMANDS = {"plan": cmd_plan, "cluster": cmd_cluster, "ingest": cmd_ingest, "bench": cmd_bench}


def main(argv=None) -> int:
    level = os.environ.get("WAYPATH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, TooLarge) as exc:
        print(f"waypath: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ParseError, InvalidGeometry, OSError, ValueError) as exc:
        print(f"waypath: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except InfeasibleToolpath as exc:
        print(f"waypath: error: InfeasibleToolpath: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from waypath import cli
from waypath.bench import generate_random_model, generate_towers
from waypath.model_io import emit_native
from waypath.objective import Toolpath

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def towers_file(tmp_path):
    p = tmp_path / "towers.json"
    p.write_text(emit_native(generate_towers(3, 4)))
    return p


def test_plan_chain_summary(tmp_path, capsys):
    p = tmp_path / "chain.json"
    p.write_text(emit_native(generate_towers(1, 5, name="chain")))
    code, out, _ = run(capsys, "plan", p, "--planner", "mcts", "--iterations", 100, "--seed", 1)
    assert code == 0
    assert out == "model=chain planner=mcts contours=5 clusters=1 travel_mm=0.800000\n"


@pytest.mark.parametrize("planner", ["layerwise", "greedy", "local", "mcts"])
def test_plan_every_planner(towers_file, capsys, planner):
    code, out, _ = run(capsys, "plan", towers_file, "--planner", planner, "--iterations", 50)
    assert code == 0 and f"planner={planner} contours=12 clusters=3" in out


def test_plan_outputs_deterministic(towers_file, tmp_path, capsys):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        code, out, _ = run(capsys, "plan", towers_file, "--seed", 42, "--iterations", 300,
                           "--gcode", d / "p.gcode", "--trace", d / "t.csv", "--svg-dir", d / "svg",
                           "--dot", d / "g.dot")
        assert code == 0
        files = {f.relative_to(d).as_posix(): f.read_bytes() for f in sorted(d.rglob("*")) if f.is_file()}
        outs.append((out, files))
    assert outs[0] == outs[1]
    assert sorted(outs[0][1]) == ["g.dot", "p.gcode", "svg/towers_k3_l4_s0_L0.svg", "svg/towers_k3_l4_s0_L1.svg",
                                  "svg/towers_k3_l4_s0_L2.svg", "svg/towers_k3_l4_s0_L3.svg", "t.csv"]


def test_exact_too_large_exits_1(tmp_path, capsys):
    p = tmp_path / "big.json"
    p.write_text(emit_native(generate_random_model(12)))
    code, _, err = run(capsys, "plan", p, "--planner", "exact")
    assert code == 1 and "TooLarge" in err


def test_bad_flags_exit_1(towers_file, capsys):
    for argv in (["plan", towers_file, "--planner", "nope"], ["plan", towers_file, "--gamma", "-1"],
                 ["plan", towers_file, "--iterations", "0"], []):
        with pytest.raises(SystemExit) as info:
            cli.main([str(a) for a in argv])
        assert info.value.code == 1
    code, _, err = run(capsys, "plan", towers_file, "--planner", "greedy", "--trace", "x.csv")
    assert code == 1


def test_parse_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.gcode"
    bad.write_text("G1 X1 E1\nG2 X3 Y3 I1 J1 E2\n")
    code, _, err = run(capsys, "plan", bad)
    assert code == 2 and "UnsupportedMode" in err
    doc = tmp_path / "bad.json"
    doc.write_text('{"schema_version": 9}')
    assert run(capsys, "plan", doc)[0] == 2
    assert run(capsys, "plan", tmp_path / "missing.json")[0] == 2
    assert run(capsys, "ingest", tmp_path / "missing.gcode")[0] == 2


def test_infeasible_exits_3(towers_file, capsys, monkeypatch):
    def broken(m, d):
        return Toolpath(tuple(reversed(range(len(m)))), 0.0, "layerwise")
    monkeypatch.setattr("waypath.planners.plan_layerwise", broken)
    code, _, err = run(capsys, "plan", towers_file, "--planner", "layerwise")
    assert code == 3 and "InfeasibleToolpath" in err


def test_ingest_then_plan_matches_direct(tmp_path, capsys):
    src = DATA / "gcode" / "20_slicer_style.gcode"
    native = tmp_path / f"{src.stem}.json"
    assert run(capsys, "ingest", src, "-o", native)[0] == 0
    _, direct, _ = run(capsys, "plan", src, "--iterations", 200)
    _, converted, _ = run(capsys, "plan", native, "--iterations", 200)
    assert direct == converted


def test_ingest_stdout(capsys):
    src = sorted((DATA / "gcode").glob("*.gcode"))[0]
    code, out, _ = run(capsys, "ingest", src)
    assert code == 0 and out == (DATA / "golden" / f"{src.stem}.json").read_text()


def _cluster_count(capsys, path, gamma):
    code, out, _ = run(capsys, "cluster", path, "--gamma", gamma)
    assert code == 0
    return int(out.split("clusters=")[1].split()[0])


@pytest.mark.parametrize("seed", range(5))
def test_cluster_threshold_monotone(tmp_path, capsys, seed):
    p = tmp_path / "r.json"
    p.write_text(emit_native(generate_random_model(30, layers=5, seed=seed)))
    assert _cluster_count(capsys, p, 0.9) >= _cluster_count(capsys, p, 0.1)


def test_cluster_exports(towers_file, tmp_path, capsys):
    code, out, _ = run(capsys, "cluster", towers_file, "--json", tmp_path / "c.json", "--dot", tmp_path / "c.dot",
                       "--svg-dir", tmp_path / "svg")
    assert code == 0 and out.count("\ncluster=") == 3
    assert len(json.loads((tmp_path / "c.json").read_text())["clusters"]) == 3
    assert len(list((tmp_path / "svg").glob("*.svg"))) == 4


def test_bench_writes_reports(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--family", "towers", "--k", 4, "--layers", 20, "--iterations", 200,
                       "--out-dir", tmp_path)
    assert code == 0
    assert "median_reduction_pct planner=mcts" in out
    rows = list(csv.DictReader((tmp_path / "report.csv").open()))
    mcts = next(r for r in rows if r["planner"] == "mcts")
    assert float(mcts["reduction_pct"]) > 50
    assert json.loads((tmp_path / "report.json").read_text())["rows"][0]["contours"] == 80


def test_bench_requires_layerwise(tmp_path, capsys):
    assert run(capsys, "bench", "--planners", "mcts", "--out-dir", tmp_path)[0] == 1
    assert run(capsys, "bench", "--family", "none", "--out-dir", tmp_path)[0] == 1


def test_bench_random_family_with_inputs(tmp_path, towers_file, capsys):
    code, _, _ = run(capsys, "bench", "--family", "random", "--count", 2, "--iterations", 100,
                     "--out-dir", tmp_path, towers_file)
    assert code == 0
    names = {r["model"] for r in csv.DictReader((tmp_path / "report.csv").open())}
    assert len(names) == 3


def test_module_entry_point(towers_file):
    res = subprocess.run([sys.executable, "-m", "waypath", "plan", str(towers_file), "--planner", "greedy"],
                         capture_output=True, text=True, env={"WAYPATH_LOG": "INFO", "PATH": ""})
    assert res.returncode == 0
    assert res.stdout.startswith("model=towers_k3_l4_s0 planner=greedy")
    assert "planning took" in res.stderr

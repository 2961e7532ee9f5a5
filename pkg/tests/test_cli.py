import csv
import json
import subprocess
import sys

import pytest

from pcmaps import cli, fixtures
from pcmaps.pcmap import dump_map, load_map_file


@pytest.fixture
def maps(tmp_path):
    out = {}
    for name, f in [("a", fixtures.collapsing_pair(2)), ("b", fixtures.collapsing_pair(4)),
                    ("dbl", fixtures.doubling()), ("con", fixtures.contracting()),
                    ("quad", fixtures.quadratic_bump()), ("fig", fixtures.gap_family(None))]:
        p = tmp_path / f"{name}.pcm"
        p.write_text(dump_map(f))
        out[name] = str(p)
    return out


def run(argv):
    code, text = cli.run_cli(argv)
    return code, json.loads(text)


def test_dist(maps):
    code, doc = run(["dist", maps["a"], maps["b"], "--metric", "comp", "--order", "0"])
    assert code == 0 and doc["schema"] == "pcm/1"
    b = doc["result"]["bounds"]
    assert b["lower"] <= 0.5 <= b["upper"]
    assert doc["config"]["map_a"] == maps["a"] and doc["config"]["seed"] == 0
    code, doc = run(["dist", maps["a"], maps["b"], "--metric", "inf"])
    assert doc["result"]["bounds"]["lower"] >= 0.5 - 1e-9


def test_check_bad_file(tmp_path):
    bad = tmp_path / "bad.pcm"
    bad.write_text("interval = [0, 1]\nbreakpoints = [0.6, 0.3]\n"
                   "branch 1 = x\nbranch 2 = x\nbranch 3 = x\n")
    code, doc = run(["check", str(bad)])
    assert code == 2
    assert doc["error"]["code"] == "BreakpointOrderError"
    assert doc["error"]["witness"]["breakpoints"] == [0.6, 0.3]


def test_missing_file_and_usage(tmp_path):
    code, doc = run(["check", str(tmp_path / "nope.pcm")])
    assert code == 2 and doc["error"]["code"] == "IOError"
    code, doc = run(["frobnicate"])
    assert code == 2 and doc["error"]["code"] == "UsageError"


def test_internal_fault(maps, monkeypatch):
    def boom(args):
        raise RuntimeError("boom")
    monkeypatch.setitem(cli.COMMANDS, "check", boom)
    code, doc = run(["check", maps["a"]])
    assert code == 1 and doc["error"]["code"] == "InternalError"


def test_connections(maps, tmp_path):
    trace = tmp_path / "trace.csv"
    code, doc = run(["connections", maps["dbl"], "--horizon", "10", "--plot-data", str(trace)])
    assert code == 0 and doc["result"]["ok"] is True and doc["result"]["min_gap"] == 0.5
    rows = list(csv.reader(trace.open()))
    assert rows[0] == ["d", "k", "orbit_point", "gap"] and len(rows) == 31
    code, doc = run(["connections", maps["fig"], "--horizon", "1"])
    assert doc["result"]["ok"] is False
    assert doc["result"]["first_violation"]["breakpoint"] == 0.5


def test_eval_xi_check(maps, tmp_path):
    code, doc = run(["eval", maps["fig"], "0", "1"])
    assert [v["y"] for v in doc["result"]["values"]] == [0.5, 0.25]
    code, doc = run(["eval", maps["fig"], "0.5", "--branch", "1"])
    assert doc["result"]["values"][0]["y"] == 0.75
    code, doc = run(["eval", maps["fig"], "0.5"])
    assert code == 2 and doc["error"]["code"] == "ValueAtBreakpoint"
    code, doc = run(["xi", maps["a"], maps["b"], "0.25"])
    assert doc["result"]["values"][0]["xi"] == pytest.approx(0.125)
    graph = tmp_path / "graph.csv"
    code, doc = run(["check", maps["quad"], "--plot-data", str(graph)])
    assert code == 0 and doc["result"]["valid"]
    rows = list(csv.reader(graph.open()))
    assert rows[0] == ["piece", "x", "y"] and len(rows) == 1 + 2 * cli.PLOT_POINTS


def test_crit_and_radius(maps):
    code, doc = run(["crit", maps["quad"]])
    assert code == 0 and doc["result"]["internal"][0]["x"] == pytest.approx(0.25, abs=1e-10)
    code, doc = run(["radius", maps["quad"], "--kind", "critical"])
    assert doc["result"]["radius"] == pytest.approx(0.125)
    code, doc = run(["radius", maps["con"], "--horizon", "3"])
    assert doc["result"]["radius"] == pytest.approx(0.0404, abs=1e-4)
    code, doc = run(["radius", maps["fig"], "--horizon", "3"])
    assert code == 2 and doc["error"]["code"] == "HasConnections"
    fig2 = maps["fig"]
    code, doc = run(["radius", fig2, "--kind", "critical"])
    assert code == 2 and doc["error"]["code"] == "OrderTooLow"


def test_perturb_repair_random_save(maps, tmp_path):
    out = tmp_path / "g.pcm"
    code, doc = run(["perturb", maps["fig"], "--index", "1", "--a", "0.48", "--b", "0.76",
                     "--eps", "0.2", "--save", str(out)])
    assert code == 0 and load_map_file(out).breakpoints == (0.48,)
    code, doc = run(["perturb", maps["fig"], "--index", "1", "--a", "0.9", "--b", "0.75",
                     "--eps", "0.2"])
    assert code == 2 and doc["error"]["code"] == "TargetTooFar"
    code, doc = run(["repair", maps["fig"], "--horizon", "10", "--eps", "0.01", "--save", str(out)])
    assert code == 0 and doc["result"]["ok"] and doc["result"]["comp0"]["upper"] < 0.01
    code, doc = run(["connections", str(out), "--horizon", "10"])
    assert doc["result"]["ok"]
    code, doc = run(["random", maps["con"], "--eps", "0.01", "--seed", "4"])
    assert code == 0 and doc["result"]["comp"]["upper"] < 0.01
    code, doc = run(["random", "--pieces", "4", "--kind", "cubic", "--seed", "4"])
    assert code == 0 and doc["result"]["map"]["N"] == 4


def test_measure_and_seq(maps, tmp_path):
    hist = tmp_path / "hist.csv"
    code, doc = run(["measure", maps["dbl"], "--cells", "16", "--plot-data", str(hist)])
    assert code == 0 and doc["result"]["residual"] <= 1e-10
    assert doc["result"]["weights"] == [1 / 16] * 16
    assert len(list(csv.reader(hist.open()))) == 17
    d = tmp_path / "seq"
    d.mkdir()
    for n in range(2, 12):
        (d / f"m{n:02d}.pcm").write_text(dump_map(fixtures.collapsing_pair(n)))
    code, doc = run(["seq", str(d), "--tol-c", "0.1"])
    assert code == 0 and doc["result"]["collapse"]["kappa_hat"] == 1
    assert doc["result"]["limit"] is None
    assert doc["result"]["limit_refused"]["code"] == "CollapseDetected"


def test_output_modes(maps):
    code, text = cli.run_cli(["measure", maps["dbl"], "--cells", "4", "--out", "csv"])
    assert text.splitlines()[0] == "cell_lo,cell_hi,weight"
    code, text = cli.run_cli(["dist", maps["a"], maps["b"], "--out", "human"])
    assert "result.bounds.upper:" in text
    code, text = cli.run_cli(["radius", maps["fig"], "--kind", "critical", "--out", "csv"])
    assert code == 2 and "error.code,OrderTooLow" in text


def test_genericity(maps):
    code, doc = run(["genericity", "--samples", "3", "--horizon", "5", "--seed", "1"])
    assert code == 0 and doc["result"]["samples"] == 3


def test_console_script(maps):
    proc = subprocess.run([sys.executable, "-m", "pcmaps.cli", "connections", maps["dbl"]],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["result"]["ok"]

"""Command-line interface: ``pcm <subcommand> [paths] [options]``.

Every run prints one JSON document (or CSV / plain text with ``--out``) that
echoes the resolved configuration. Exit status: 0 ok, 2 invalid input or a
failed precondition, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import connections, critical, measures, metrics, perturb, sequences
from .errors import PCMError
from .generators import genericity_experiment, random_map
from .pcmap import PCMap, _branch_jets, branch_value, dump_map, eval_map, load_map_file, xi_deform

SCHEMA = "pcm/1"
PLOT_POINTS = 2048


class _Fail(Exception):
    """Error raised by argparse, reported like any other input error."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Fail(message)


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--order", type=int, default=None, help="derivative order r")
    p.add_argument("--metric", choices=("comp", "inf"), default="comp")
    p.add_argument("--horizon", type=int, default=10)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--cells", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", choices=("json", "csv", "human"), default="json")
    p.add_argument("--plot-data", default=None, help="write raw plot data (CSV) to this path")
    p.add_argument("--tol", type=float, default=metrics.DEFAULT_TOL, help="kernel target width")
    p.add_argument("--budget", type=int, default=metrics.DEFAULT_BUDGET,
                   help="kernel evaluations per sup term")
    p.add_argument("--clamp", action="store_true", help="project branch values onto the domain")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="pcm", description="Piecewise interval maps: metrics, orbits, measures.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    add("check", "validate a map file").add_argument("map")
    p = add("eval", "evaluate a map (or one branch) at points")
    p.add_argument("map")
    p.add_argument("points", type=float, nargs="+")
    p.add_argument("--branch", type=int, default=None, help="use this branch (closed piece)")
    p.add_argument("--deriv", type=int, default=0)
    p = add("dist", "distance between two maps")
    p.add_argument("map_a")
    p.add_argument("map_b")
    p = add("xi", "deformation between the pieces of two maps")
    p.add_argument("map_a")
    p.add_argument("map_b")
    p.add_argument("points", type=float, nargs="+")
    p = add("seq", "sequence diagnostics (directory or manifest)")
    p.add_argument("path")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--tol-c", type=float, default=1e-3)
    p.add_argument("--probes", type=int, default=16)
    add("crit", "critical point census").add_argument("map")
    add("connections", "one-sided value orbits up to the horizon").add_argument("map")
    p = add("radius", "robustness radius")
    p.add_argument("map")
    p.add_argument("--kind", choices=("critical", "connections"), default="connections")
    p = add("perturb", "move one breakpoint and its one-sided limit")
    p.add_argument("map")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--side", choices=("left", "right"), default="left")
    p.add_argument("--save", default=None, help="write the new map document here")
    p = add("repair", "remove connections up to the horizon")
    p.add_argument("map")
    p.add_argument("--save", default=None)
    p = add("measure", "Ulam approximation of an invariant measure")
    p.add_argument("map")
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--method", choices=("sample", "exact"), default="sample")
    p = add("random", "random neighbour of a map, or a random map without one")
    p.add_argument("map", nargs="?", default=None)
    p.add_argument("--pieces", type=int, default=3)
    p.add_argument("--kind", choices=("affine", "cubic"), default="affine")
    p.add_argument("--lip", type=float, default=2.0)
    p.add_argument("--save", default=None)
    p = add("genericity", "random maps: no-connection rate and repair outcomes")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--pieces", type=int, default=3)
    p.add_argument("--kind", choices=("affine", "cubic"), default="affine")
    p.add_argument("--lip", type=float, default=2.0)
    p.add_argument("--plant-fraction", type=float, default=0.25)
    return parser


# ---------------------------------------------------------------------------
# helpers


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return v


def _opts(args) -> metrics.KernelOptions:
    return metrics.KernelOptions(budget=args.budget, tol=args.tol, threads=args.threads)


def _load(path, args) -> PCMap:
    return load_map_file(path, clamp=args.clamp)


def _map_summary(f: PCMap) -> dict:
    out = {"domain": list(f.domain), "N": f.N, "order": f.order,
           "breakpoints": list(f.breakpoints), "document": dump_map(f)}
    return out


def _graph_rows(f: PCMap, label: str | None = None) -> tuple[list[str], list[tuple]]:
    header = (["map"] if label else []) + ["piece", "x", "y"]
    rows = []
    for i in range(1, f.N + 1):
        a, b = f.piece(i)
        xs = np.linspace(a, b, PLOT_POINTS)
        xs[-1] = b
        ys = _branch_jets(f, i, xs, 0)[0]
        for x, y in zip(xs.tolist(), ys.tolist()):
            rows.append(((label,) if label else ()) + (i, x, y))
    return header, rows


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _flatten(prefix, v, out):
    if isinstance(v, dict):
        for k, x in v.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), x, out)
    elif isinstance(v, list) and v and all(isinstance(x, (dict, list)) for x in v):
        for k, x in enumerate(v):
            _flatten(f"{prefix}[{k}]", x, out)
    else:
        out.append((prefix, v))


def _save(doc_path, f: PCMap) -> None:
    if doc_path:
        Path(doc_path).write_text(dump_map(f), encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands; each returns (result dict, optional table, optional plot table)


def cmd_check(args):
    f = _load(args.map, args)
    plot = _graph_rows(f)
    return {"valid": True, "map": _map_summary(f)}, None, plot


def cmd_eval(args):
    f = _load(args.map, args)
    if args.branch is None:
        ys = [eval_map(f, x) for x in args.points]
    else:
        ys = [branch_value(f, args.branch, args.deriv, x) for x in args.points]
    rows = list(zip(args.points, ys))
    res = {"branch": args.branch, "deriv": args.deriv,
           "values": [{"x": x, "y": y} for x, y in rows]}
    return res, (["x", "y"], rows), _graph_rows(f)


def cmd_dist(args):
    f, g = _load(args.map_a, args), _load(args.map_b, args)
    r = 0 if args.order is None else args.order
    fn = metrics.comp_metric if args.metric == "comp" else metrics.dist_inf_metric
    b = fn(f, g, r, _opts(args))
    ha, ra = _graph_rows(f, "a")
    _, rb = _graph_rows(g, "b")
    return {"metric": args.metric, "order": r, "bounds": b.to_dict()}, None, (ha, ra + rb)


def cmd_xi(args):
    f, g = _load(args.map_a, args), _load(args.map_b, args)
    ys = [xi_deform(f, g, x) for x in args.points]
    rows = list(zip(args.points, ys))
    return {"values": [{"x": x, "xi": y} for x, y in rows]}, (["x", "xi"], rows), None


def cmd_seq(args):
    seq = sequences.load_sequence(args.path)
    r = 0 if args.order is None else args.order
    opts = _opts(args)
    matrix = sequences.pairwise_comp(seq, r, opts)
    collapse = sequences.collapse_estimate(seq, args.tol_c, args.window)
    res = {"length": len(seq), "order": r,
           "pairwise_upper": [[b.upper for b in row] for row in matrix],
           "pairwise_lower": [[b.lower for b in row] for row in matrix],
           "collapse": collapse.to_dict()}
    try:
        est = sequences.limit_estimate(seq, r, args.probes, args.window, args.tol_c, opts)
        res["limit"] = est.to_dict()
    except PCMError as err:
        res["limit"] = None
        res["limit_refused"] = err.to_dict()
    rows = [(a, b, matrix[a][b].lower, matrix[a][b].upper)
            for a in range(len(seq)) for b in range(len(seq))]
    return res, (["m", "n", "lower", "upper"], rows), None


def cmd_crit(args):
    f = _load(args.map, args)
    rep = critical.critical_census(f)
    rows = [(p.x, p.piece, p.residual, p.second) for p in rep.internal]
    return rep.to_dict(), (["x", "piece", "f1", "f2"], rows), _graph_rows(f)


def cmd_connections(args):
    f = _load(args.map, args)
    rep = connections.check_connections(f, args.horizon)
    trace = (["d", "k", "orbit_point", "gap"], rep.trace_rows())
    return rep.to_dict(), trace, trace


def cmd_radius(args):
    f = _load(args.map, args)
    if args.kind == "critical":
        cert = critical.critical_radius(f, _opts(args))
        return {"kind": "critical", **cert.to_dict()}, None, None
    lam = connections.lipschitz_estimate(f, _opts(args))
    eps = connections.connection_radius(f, args.horizon, lam)
    rep = connections.check_connections(f, args.horizon)
    return {"kind": "connections", "radius": eps, "degenerate": eps == 0.0,
            "horizon": args.horizon, "min_gap": rep.min_gap, "lipschitz": lam.to_dict()}, None, None


def cmd_perturb(args):
    f = _load(args.map, args)
    g = perturb.perturb_breakpoint(f, args.index, args.a, args.b, args.eps, args.side, _opts(args))
    _save(args.save, g)
    d = metrics.comp_metric(f, g, 0, _opts(args))
    return {"map": _map_summary(g), "comp0": d.to_dict(),
            "extension": args.side == "right"}, None, _graph_rows(g)


def cmd_repair(args):
    f = _load(args.map, args)
    result = perturb.repair_connections(f, args.horizon, args.eps, args.seed, opts=_opts(args))
    _save(args.save, result.map)
    return {"map": _map_summary(result.map), **result.to_dict()}, None, _graph_rows(result.map)


def cmd_measure(args):
    f = _load(args.map, args)
    op = measures.ulam_operator(f, args.cells, args.samples, args.seed, args.method)
    mu = measures.stationary_measure(op)
    rows = measures.histogram_rows(op, mu)
    res = {"k": args.cells, "k_refined": op.size, "samples_per_cell": args.samples,
           "method": args.method, **mu.to_dict(),
           "invariance_residual": measures.invariance_residual(f, mu, op),
           "weights": [w for _, _, w in rows], "edges": op.edges.tolist()}
    table = (["cell_lo", "cell_hi", "weight"], rows)
    return res, table, table


def cmd_random(args):
    if args.map is None:
        g = random_map(np.random.default_rng(args.seed), args.pieces, args.kind, args.lip,
                       order=0 if args.order is None else args.order)
        res = {"map": _map_summary(g)}
    else:
        f = _load(args.map, args)
        g = perturb.random_neighbor(f, args.eps, args.seed, args.order, _opts(args))
        r = f.order if args.order is None else args.order
        res = {"map": _map_summary(g), "comp": metrics.comp_metric(f, g, r, _opts(args)).to_dict()}
    _save(args.save, g)
    return res, None, _graph_rows(g)


def cmd_genericity(args):
    res = genericity_experiment(args.samples, args.horizon, args.seed, args.pieces, args.kind,
                                args.lip, args.plant_fraction, args.eps)
    rows = [(r["index"], r["pass"], r["min_gap"], r.get("repair", "")) for r in res["rows"]]
    return res, (["index", "pass", "min_gap", "repair"], rows), None


COMMANDS = {
    "check": cmd_check, "eval": cmd_eval, "dist": cmd_dist, "xi": cmd_xi, "seq": cmd_seq,
    "crit": cmd_crit, "connections": cmd_connections, "radius": cmd_radius,
    "perturb": cmd_perturb, "repair": cmd_repair, "measure": cmd_measure,
    "random": cmd_random, "genericity": cmd_genericity,
}


def _render(doc: dict, mode: str, table) -> str:
    if mode == "csv" and table is not None and "error" not in doc:
        return _csv_text(*table)
    if mode == "human":
        flat = []
        _flatten("", doc, flat)
        return "".join(f"{k}: {v}\n" for k, v in flat)
    if mode == "csv":
        flat = []
        _flatten("", doc, flat)
        return _csv_text(["key", "value"], flat)
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def run_cli(argv: list[str]) -> tuple[int, str]:
    """Run one command; returns (exit status, output text)."""
    try:
        args = build_parser().parse_args(argv)
    except _Fail as err:
        doc = {"schema": SCHEMA, "error": {"code": "UsageError", "message": str(err)}}
        return 2, json.dumps(doc, indent=2) + "\n"
    except SystemExit as exc:  # --help
        return int(exc.code or 0), ""
    config = _jsonable({k: v for k, v in vars(args).items()})
    doc = {"schema": SCHEMA, "command": args.command, "config": config}
    status, table = 0, None
    try:
        result, table, plot = COMMANDS[args.command](args)
        doc["result"] = _jsonable(result)
        if args.plot_data and plot is not None:
            _write_csv(args.plot_data, *plot)
    except PCMError as err:
        status = 2
        doc["error"] = _jsonable(err.to_dict())
    except OSError as err:
        status = 2
        doc["error"] = {"code": "IOError", "message": str(err)}
    except Exception as err:  # noqa: BLE001 - reported as an internal fault
        status = 1
        doc["error"] = {"code": "InternalError", "message": f"{type(err).__name__}: {err}"}
    return status, _render(doc, args.out, table)


def main(argv: list[str] | None = None) -> int:
    status, text = run_cli(sys.argv[1:] if argv is None else argv)
    sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())

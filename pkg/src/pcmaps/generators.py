"""Seeded random maps and the no-connection genericity experiment."""

from __future__ import annotations

import math

import numpy as np

from .connections import check_connections, d_set, iterate
from .errors import PCMError
from .expr import Add, Expr, Mul, Pow, Sub, X, num
from .pcmap import PCMap, _branch_jets, locate, validate_map
from .perturb import _shift_exact, repair_connections

MIN_GAP_FRACTION = 0.05
RANGE_FILL = 0.98


def random_breakpoints(rng: np.random.Generator, N: int, domain=(0.0, 1.0),
                       min_gap_fraction: float = MIN_GAP_FRACTION) -> list[float]:
    lo, hi = domain
    width = hi - lo
    gap = min_gap_fraction * width
    if N * gap >= width:
        raise ValueError("minimum gap too large for this many pieces")
    lengths = gap + (width - N * gap) * rng.dirichlet(np.ones(N))
    return [float(v) for v in lo + np.cumsum(lengths)[:-1]]


def _affine_branch(rng, a: float, b: float, domain, lip: float) -> Expr:
    lo, hi = domain
    length = b - a
    slope = float(rng.uniform(-lip, lip))
    slope = math.copysign(min(abs(slope), RANGE_FILL * (hi - lo) / length), slope)
    w = abs(slope) * length
    bottom = float(rng.uniform(lo, hi - w))
    start = bottom if slope >= 0 else bottom + w
    return Add(num(start), Mul(num(slope), Sub(X, num(a))))


def _cubic_branch(rng, a: float, b: float, domain, lip: float) -> Expr:
    lo, hi = domain
    length = b - a
    c1, c2, c3 = (float(v) for v in rng.uniform(-1.0, 1.0, 3))
    t = np.linspace(0.0, 1.0, 2049)
    p = c1 * t + c2 * t ** 2 + c3 * t ** 3
    dp = np.abs(c1 + 2 * c2 * t + 3 * c3 * t ** 2)
    cand = [0.0, 1.0]
    if c3 != 0.0:
        cand.append(min(max(-c2 / (3 * c3), 0.0), 1.0))
    max_slope = max(float(dp.max()), max(abs(c1 + 2 * c2 * s + 3 * c3 * s * s) for s in cand)) / length
    spread = float(p.max() - p.min()) * 1.01
    scale = min(lip / max(max_slope, 1e-12), RANGE_FILL * (hi - lo) / max(spread, 1e-12))
    pmin, pmax = scale * float(p.min()), scale * float(p.max())
    slack = 0.005 * (pmax - pmin)
    shift = float(rng.uniform(lo - pmin + slack, hi - pmax - slack))
    u = Mul(Sub(X, num(a)), num(1.0 / length))
    poly = Add(Add(Mul(num(c1), u), Mul(num(c2), Pow(u, 2))), Mul(num(c3), Pow(u, 3)))
    return Add(num(shift), Mul(num(scale), poly))


def random_map(rng: np.random.Generator, N: int = 3, kind: str = "affine", lip: float = 2.0,
               domain=(0.0, 1.0), order: int = 0,
               min_gap_fraction: float = MIN_GAP_FRACTION) -> PCMap:
    """Random ordered breakpoints (minimum gap a fraction of |X|) with affine or
    rescaled cubic branches whose slopes stay below ``lip``."""
    if kind not in ("affine", "cubic"):
        raise ValueError(f"unknown generator kind {kind!r}")
    bps = random_breakpoints(rng, N, domain, min_gap_fraction)
    cuts = [float(domain[0])] + bps + [float(domain[1])]
    make = _affine_branch if kind == "affine" else _cubic_branch
    branches = tuple(make(rng, cuts[i], cuts[i + 1], domain, lip) for i in range(N))
    f = PCMap((float(domain[0]), float(domain[1])), tuple(bps), branches, order)
    return validate_map(f)


def plant_connection(f: PCMap, rng: np.random.Generator, n: int, attempts: int = 64) -> PCMap:
    """Shift one branch by a constant so that some orbit of a one-sided value lands
    exactly on a breakpoint within the horizon ``n``."""
    ds = d_set(f)
    bps = list(f.breakpoints)
    for _ in range(attempts):
        d = ds[int(rng.integers(len(ds)))]
        k = int(rng.integers(min(n, 3)))
        target = bps[int(rng.integers(len(bps)))]
        if k == 0:
            branch, point = d.side, f.cuts[d.source]
        else:
            p = d.value
            ok = True
            for _step in range(k - 1):
                if np.min(np.abs(np.asarray(bps) - p)) <= 1e-9:
                    ok = False
                    break
                p = iterate(f, p)
            if not ok or np.min(np.abs(np.asarray(bps) - p)) <= 1e-9:
                continue
            branch, point = int(locate(f, p)), p
        value = float(_branch_jets(f, branch, np.array([point]), 0)[0][0])
        nodes = list(f.branches)
        nodes[branch - 1] = _shift_exact(nodes[branch - 1], value, target)
        try:
            g = validate_map(f.with_(branches=tuple(nodes)))
        except PCMError:
            continue
        if not check_connections(g, n).ok:
            return g
    raise RuntimeError("could not plant a connection")


def genericity_experiment(samples: int, horizon: int, seed: int = 0, N: int = 3,
                          kind: str = "affine", lip: float = 2.0, plant_fraction: float = 0.25,
                          eps: float = 0.01) -> dict:
    """Fraction of random maps without connections up to ``horizon``, and the
    outcome of repairing each failure within comp^0 distance ``eps``."""
    if samples < 1 or horizon < 1:
        raise ValueError("samples and horizon must be >= 1")
    rng = np.random.default_rng(seed)
    rows = []
    for s in range(samples):
        f = random_map(rng, N, kind, lip)
        planted = False
        if rng.random() < plant_fraction:
            try:
                f = plant_connection(f, rng, horizon)
                planted = True
            except RuntimeError:
                pass
        report = check_connections(f, horizon)
        row = {"index": s, "planted": planted, "pass": report.ok, "min_gap": report.min_gap,
               "breakpoints": list(f.breakpoints), "d_values": [d.value for d in report.d_set]}
        if not report.ok:
            try:
                result = repair_connections(f, horizon, eps, seed=s)
                row["repair"] = "repaired"
                row["repair_comp0_upper"] = result.comp.upper
                row["repair_rounds"] = len(result.rounds)
            except PCMError as err:
                row["repair"] = err.code
        rows.append(row)
    failures = [r for r in rows if not r["pass"]]
    repaired = sum(r.get("repair") == "repaired" for r in failures)
    no_room = sum(r.get("repair") == "NoRoomToMove" for r in failures)
    eligible = len(failures) - no_room
    return {
        "samples": samples, "horizon": horizon, "seed": seed,
        "generator": {"N": N, "kind": kind, "lipschitz_cap": lip, "plant_fraction": plant_fraction,
                      "min_gap_fraction": MIN_GAP_FRACTION},
        "eps": eps,
        "passed": samples - len(failures), "pass_fraction": (samples - len(failures)) / samples,
        "failures": len(failures), "repaired": repaired, "no_room_to_move": no_room,
        "repair_success_fraction": repaired / eligible if eligible else None,
        "rows": rows,
    }

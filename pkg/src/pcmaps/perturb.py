"""Explicit perturbations: moving one breakpoint and one-sided limit, sampling
maps near a given one, and removing connections by a PL precomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connections import (ORBIT_TOL, ConnectionReport, LipschitzEstimate, check_connections,
                          d_set, iterate, lipschitz_estimate)
from .errors import (InvalidArgument, NoRoomToMove, OrderCollision, OutsidePiece,
                     RangeViolation, SamplingFailed, TargetTooFar, VerificationFailed)
from .expr import Add, Expr, Mul, Sub, X, affine_coefficients, num, substitute
from .metrics import Bounds, KernelOptions, comp_metric, sup_of_values
from .pcmap import HomeoSpec, PCMap, branch_value, validate_map

SAMPLING_RETRIES = 16
ETA_FLOOR = 1e-9


def _reparametrized(node: Expr, anchor_src: float, anchor_dst: float, slope: float) -> Expr:
    """``node`` composed with y -> anchor_dst + slope*(y - anchor_src)."""
    if slope == 1.0 and anchor_src == anchor_dst:
        return node
    inner = Add(num(anchor_dst), Mul(num(slope), Sub(X, num(anchor_src))))
    return substitute(node, inner)


def _shift_exact(node: Expr, old: float, new: float) -> Expr:
    """Add ``new - old`` so that a point where ``node`` evaluates to exactly
    ``old`` evaluates to exactly ``new``."""
    if old == new:
        return node
    return Add(Sub(node, num(old)), num(new))


def perturb_breakpoint(f: PCMap, i: int, a: float, b: float, eps: float,
                       side: str = "left", opts: KernelOptions | None = None) -> PCMap:
    """Move breakpoint ``c_i`` to ``a`` and the one-sided limit there to ``b``.

    ``side="left"`` moves the limit from the left (branch i); ``"right"`` moves
    the limit from the right (branch i+1). Both adjacent branches are affinely
    reparametrized so their pieces follow the breakpoint; the changed limit is
    then shifted by a constant on its piece.
    """
    if side not in ("left", "right"):
        raise InvalidArgument(f"side must be 'left' or 'right', not {side!r}", {"side": side})
    if not 1 <= i <= f.N - 1:
        raise OutsidePiece(f"breakpoint index {i} not in 1..{f.N - 1}", {"i": i})
    if not eps > 0:
        raise InvalidArgument("eps must be positive", {"eps": eps})
    cuts = f.cuts
    c = cuts[i]
    piece = i if side == "left" else i + 1
    limit = branch_value(f, piece, 0, c)
    if not abs(a - c) < eps / f.N:
        raise TargetTooFar(f"|a - c_{i}| = {abs(a - c)!r} is not below eps/N = {eps / f.N!r}",
                           {"a": a, "c": c, "bound": eps / f.N})
    if not abs(b - limit) < eps / f.N:
        raise TargetTooFar(f"|b - limit| = {abs(b - limit)!r} is not below eps/N = {eps / f.N!r}",
                           {"b": b, "limit": limit, "bound": eps / f.N})
    if not cuts[i - 1] < a < cuts[i + 1]:
        raise OrderCollision(f"a = {a!r} must lie strictly between {cuts[i - 1]!r} and {cuts[i + 1]!r}",
                             {"a": a, "neighbors": [cuts[i - 1], cuts[i + 1]]})
    new_bps = list(f.breakpoints)
    new_bps[i - 1] = float(a)
    branches = list(f.branches)
    for k in (i, i + 1):
        lo, hi = f.piece(k)
        nlo, nhi = (lo, a) if k == i else (a, hi)
        # anchor at the moved breakpoint so both one-sided limits there are exact
        branches[k - 1] = _reparametrized(branches[k - 1], a, c, (hi - lo) / (nhi - nlo))
    branches[piece - 1] = _shift_exact(branches[piece - 1], limit, b)
    g = validate_map(f.with_(breakpoints=tuple(new_bps), branches=tuple(branches)))
    dist = comp_metric(f, g, 0, opts)
    if not dist.upper < eps:
        raise VerificationFailed(f"comp^0 upper bound {dist.upper!r} is not below eps={eps!r}",
                                 {"comp0": dist.to_dict(), "eps": eps})
    return g


def _value_range(f: PCMap, i: int) -> tuple[float, float]:
    """Lower bound of min f_i and upper bound of max f_i on the closed piece."""
    aff = affine_coefficients(f.branches[i - 1]) if f.reparam is None else None
    if aff is not None:
        lo, hi = f.piece(i)
        v = aff[0] * np.array([lo, hi]) + aff[1]
        return float(v.min()), float(v.max())
    top = sup_of_values(f, i, 1.0)
    bottom = sup_of_values(f, i, -1.0)
    return -bottom.upper, top.upper


def random_neighbor(f: PCMap, eps: float, seed: int, r: int | None = None,
                    opts: KernelOptions | None = None) -> PCMap:
    """A random map within comp^r distance ``eps`` of ``f`` (r defaults to f's order)."""
    r = f.order if r is None else r
    if not eps > 0:
        raise InvalidArgument("eps must be positive", {"eps": eps})
    min_len = float(f.piece_lengths().min())
    if not eps < 0.5 * min_len:
        raise InvalidArgument(f"eps={eps!r} must be below half the shortest piece ({min_len!r})",
                              {"eps": eps, "min_piece": min_len})
    rng = np.random.default_rng(seed)
    N = f.N
    lo, hi = f.domain
    ranges = [_value_range(f, i) for i in range(1, N + 1)]
    cuts = np.asarray(f.cuts)
    for attempt in range(SAMPLING_RETRIES):
        shrink = 0.5 ** attempt
        jitter = eps / (4 * N) * shrink
        spread = eps / (4 * N * (r + 1)) * shrink
        bps = cuts[1:-1] + rng.uniform(-jitter, jitter, N - 1)
        offsets = rng.uniform(-1.0, 1.0, N)
        new_cuts = np.concatenate([[lo], bps, [hi]])
        if np.any(np.diff(new_cuts) <= 0):
            continue
        branches = []
        for k in range(1, N + 1):
            src = (float(new_cuts[k - 1]), float(new_cuts[k]))
            dst = (float(cuts[k - 1]), float(cuts[k]))
            node = _reparametrized(f.branches[k - 1], src[1], dst[1],
                                   (dst[1] - dst[0]) / (src[1] - src[0]))
            vmin, vmax = ranges[k - 1]
            t_lo, t_hi = max(-spread, lo - vmin), min(spread, hi - vmax)
            t = 0.0
            if t_lo < t_hi:
                t = t_lo + (t_hi - t_lo) * 0.5 * (offsets[k - 1] + 1.0)
            if t > 0.0:
                node = Add(node, num(t))
            elif t < 0.0:
                node = Sub(node, num(-t))
            branches.append(node)
        try:
            g = validate_map(f.with_(breakpoints=tuple(float(v) for v in bps),
                                     branches=tuple(branches)))
        except RangeViolation:
            continue
        dist = comp_metric(f, g, r, opts)
        if dist.upper < eps:
            return g
    raise SamplingFailed(f"no neighbour within eps={eps!r} after {SAMPLING_RETRIES} attempts",
                         {"eps": eps, "seed": seed})


# ---------------------------------------------------------------------------
# connection repair


@dataclass(frozen=True)
class RepairRound:
    homeo: HomeoSpec     # h for this round (new map = previous map composed with h)
    lam: float
    budget: float        # the eps share this round may spend
    eta: float
    d_star: tuple[float, ...]
    moves: tuple[float, ...]  # new breakpoint minus old breakpoint

    @property
    def displacement_bound(self) -> float:
        """The bound max|h(x) - x| must stay under for this round."""
        return self.budget


@dataclass(frozen=True)
class RepairResult:
    map: PCMap
    homeo: HomeoSpec           # total precomposition carried by the output map
    rounds: tuple[RepairRound, ...]
    comp: Bounds
    report: ConnectionReport
    lam: LipschitzEstimate
    seed: int

    @property
    def heuristic(self) -> bool:
        return not self.lam.certified

    def to_dict(self) -> dict:
        return {"ok": self.report.ok, "rounds": len(self.rounds), "comp0": self.comp.to_dict(),
                "lipschitz": self.lam.to_dict(), "heuristic": self.heuristic, "seed": self.seed,
                "breakpoints": list(self.map.breakpoints),
                "homeo_knots": [list(k) for k in self.homeo.knots],
                "moves": [list(r.moves) for r in self.rounds]}


def orbit_skeleton(f: PCMap, n: int, orbit_tol: float = ORBIT_TOL) -> list[float]:
    """Orbit points f^j(d), j < n(d), of every one-sided value d, where n(d) is the
    first time the orbit meets a breakpoint (or n if it never does)."""
    bps = np.asarray(f.breakpoints)
    pts = []
    for d in d_set(f):
        p = d.value
        for k in range(n):
            if np.min(np.abs(bps - p)) <= orbit_tol:
                break
            pts.append(p)
            if k + 1 < n:
                p = iterate(f, p)
    return pts


def _choose_moves(cuts: np.ndarray, d_star: np.ndarray, bound: float, eta: float) -> list[float] | None:
    """New positions for every interior cut, or None if some cut has no admissible spot."""
    inner = cuts[1:-1]
    chosen = []
    for idx, c in enumerate(inner):
        others = np.delete(inner, idx)
        found = None
        k = 1
        while k * eta < bound:
            for delta in (k * eta, -k * eta):
                x = c + delta
                seg_lo, seg_hi = min(c, x) - 0.5 * eta, max(c, x) + 0.5 * eta
                if np.any((d_star >= seg_lo) & (d_star <= seg_hi)):
                    continue
                if others.size and np.min(np.abs(others - x)) < 0.5 * eta:
                    continue
                if chosen and x <= chosen[-1] + 0.5 * eta:
                    continue
                if not cuts[0] < x < cuts[-1]:
                    continue
                found = x
                break
            if found is not None:
                break
            k += 1
        if found is None:
            return None
        chosen.append(found)
    return chosen


def _repair_round(cur: PCMap, n: int, budget: float, lam: float,
                  orbit_tol: float) -> tuple[PCMap, RepairRound]:
    N = cur.N
    lo, hi = cur.domain
    cuts = np.asarray(cur.cuts)
    pts = np.unique(np.asarray(orbit_skeleton(cur, n, orbit_tol), float))
    bound = budget / (4 * N * (1 + lam))
    eta = min(budget / (8 * N * (1 + lam)), float(np.diff(cuts).min()) / 8)
    floor = ETA_FLOOR * (hi - lo)
    moves = None
    while eta >= floor:
        moves = _choose_moves(cuts, pts, bound, eta)
        if moves is not None:
            break
        eta *= 0.5
    if moves is None:
        raise NoRoomToMove(f"no admissible breakpoint positions at resolution {floor!r}",
                           {"eta_floor": floor, "d_star_size": int(pts.size),
                            "breakpoints": list(cur.breakpoints)})
    fixed = pts[(pts > lo) & (pts < hi)]
    xs = np.concatenate([[lo, hi], fixed, moves])
    ys = np.concatenate([[lo, hi], fixed, cuts[1:-1]])
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise NoRoomToMove("moved breakpoints would break monotonicity of the homeomorphism",
                           {"eta": eta})
    h = HomeoSpec(tuple(float(v) for v in xs), tuple(float(v) for v in ys))
    total = h if cur.reparam is None else cur.reparam.compose(h)
    nxt = validate_map(cur.with_(breakpoints=tuple(float(m) for m in moves), reparam=total,
                                 order=0))
    rnd = RepairRound(h, lam, bound, eta, tuple(float(p) for p in pts),
                      tuple(float(m - c) for m, c in zip(moves, cuts[1:-1])))
    return nxt, rnd


def repair_connections(f: PCMap, n: int, eps: float, seed: int = 0,
                       orbit_tol: float = ORBIT_TOL, opts: KernelOptions | None = None) -> RepairResult:
    """Remove connections up to horizon ``n`` by precomposing with increasing PL
    homeomorphisms that fix the relevant orbit points and nudge breakpoints.

    A single round only protects orbits up to their first breakpoint hit, so
    rounds repeat, each spending at most half of the remaining comp^0 budget.
    The search is deterministic; ``seed`` is recorded for the report only.
    """
    if n < 1:
        raise InvalidArgument("horizon must be >= 1", {"n": n})
    if not eps > 0:
        raise InvalidArgument("eps must be positive", {"eps": eps})
    lam0 = lipschitz_estimate(f, opts)
    report = check_connections(f, n, orbit_tol)
    identity = HomeoSpec.identity(*f.domain)
    if report.ok:
        return RepairResult(f, identity, (), Bounds(0.0, 0.0), report, lam0, seed)
    cur = f.with_(order=0)
    rounds = []
    spent = 0.0
    max_rounds = n * (2 * f.N - 1) + 1
    while not report.ok:
        if len(rounds) >= max_rounds:
            raise VerificationFailed(f"connections remain after {max_rounds} rounds",
                                     {"rounds": len(rounds), "violation":
                                      report.first_violation.to_dict()})
        lam = lam0.value if not rounds else lipschitz_estimate(cur, opts).value
        budget = 0.5 * (eps - spent)
        cur, rnd = _repair_round(cur, n, budget, lam, orbit_tol)
        rounds.append(rnd)
        spent = comp_metric(f.with_(order=0), cur, 0, opts).upper
        if not spent < eps:
            raise VerificationFailed(f"comp^0 upper bound {spent!r} reached eps={eps!r}",
                                     {"comp0_upper": spent, "eps": eps, "rounds": len(rounds)})
        report = check_connections(cur, n, orbit_tol)
    dist = comp_metric(f.with_(order=0), cur, 0, opts)
    return RepairResult(cur, cur.reparam, tuple(rounds),
                        dist, report, lam0, seed)

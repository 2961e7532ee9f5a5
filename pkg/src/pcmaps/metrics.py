"""Certified suprema and the distances between piecewise maps.

The kernel :func:`certified_sup` brackets the maximum of a function on an
interval: the best sampled value is a lower bound, and a per-cell slope bound
turns the samples into an upper bound. Cells are bisected until the bracket is
narrower than ``tol`` or the evaluation budget runs out.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import interval as iv
from .errors import DegenerateDomain, NonFiniteObjective, OrderTooHigh
from .expr import Expr, jets, jets_interval
from .pcmap import (IntervalPair, PCMap, _branch_jets, _branch_jets_interval, affine_between,
                    check_same_shape, hausdorff_interval)

DEFAULT_SAMPLES = 1024
DEFAULT_TOL = 1e-9
DEFAULT_BUDGET = 200_000
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Bounds:
    """Enclosure ``lower <= value <= upper`` of a computed quantity."""

    lower: float
    upper: float
    heuristic_upper: bool = False
    exhausted: bool = False
    argmax: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if self.argmax is not None:
            object.__setattr__(self, "argmax", float(self.argmax))

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack

    def intersects(self, other: "Bounds") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def __add__(self, other: "Bounds") -> "Bounds":
        return Bounds(self.lower + other.lower, self.upper + other.upper,
                      self.heuristic_upper or other.heuristic_upper,
                      self.exhausted or other.exhausted)

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "width": self.width,
                "heuristic_upper": self.heuristic_upper, "budget_exhausted": self.exhausted}


ZERO = Bounds(0.0, 0.0)

SlopeHint = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray], None]


@dataclass(frozen=True)
class SupQuery:
    objective: Callable[[np.ndarray], np.ndarray]
    domain: IntervalPair
    budget: int = DEFAULT_BUDGET
    tol: float = DEFAULT_TOL
    derivative_hint: SlopeHint = None
    initial_samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if self.budget < 64:
            raise ValueError("budget must be at least 64")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class KernelOptions:
    """Kernel settings shared by the metric functions."""

    budget: int = DEFAULT_BUDGET
    tol: float = DEFAULT_TOL
    initial_samples: int = DEFAULT_SAMPLES
    threads: int = 1


def _evaluate(objective, x: np.ndarray) -> np.ndarray:
    y = np.asarray(objective(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape).astype(float)
    bad = ~np.isfinite(y)
    if np.any(bad):
        x0 = float(x[bad][0])
        raise NonFiniteObjective(f"objective is not finite at x={x0!r}", {"x": x0})
    return y


def certified_sup(q: SupQuery) -> Bounds:
    """Bracket ``max objective`` over ``q.domain`` (see module docstring)."""
    lo, hi = float(q.domain.lo), float(q.domain.hi)
    if lo == hi:
        v = float(_evaluate(q.objective, np.array([lo]))[0])
        return Bounds(v, v, argmax=lo)
    n0 = max(2, min(q.initial_samples, q.budget))
    x = np.linspace(lo, hi, n0)
    x[-1] = hi
    fx = _evaluate(q.objective, x)
    evals = n0
    best = int(np.argmax(fx))
    lower, arg = float(fx[best]), float(x[best])

    hint = q.derivative_hint
    heuristic = hint is None
    a, b, fa, fb = x[:-1], x[1:], fx[:-1], fx[1:]
    fd_slope = 0.0

    def slope_bounds(a, b, fa, fb):
        nonlocal fd_slope
        if heuristic:
            if a.size:
                fd_slope = max(fd_slope, float(np.max(np.abs(fb - fa) / (b - a))))
            return np.full(a.shape, 1.5 * fd_slope)
        if callable(hint):
            return np.asarray(hint(a, b), dtype=float)
        return np.full(a.shape, float(hint))

    L = slope_bounds(a, b, fa, fb)
    settled = -math.inf
    exhausted = False
    while True:
        if heuristic:
            L = np.full(a.shape, 1.5 * fd_slope)
        with np.errstate(invalid="ignore", over="ignore"):
            ub = 0.5 * (fa + fb) + 0.5 * L * (b - a)
        ub = np.where(np.isnan(ub), np.inf, ub)
        ub = np.maximum(ub, np.maximum(fa, fb))
        active_max = float(ub.max()) if ub.size else -math.inf
        upper = max(lower, settled, active_max)
        if upper - lower <= q.tol or not ub.size:
            break
        need = ub > lower + q.tol
        if np.any(~need):
            settled = max(settled, float(ub[~need].max()))
        a, b, fa, fb, L, ub = a[need], b[need], fa[need], fb[need], L[need], ub[need]
        m = 0.5 * (a + b)
        splittable = (m > a) & (m < b)
        if not np.all(splittable):
            # cells at float resolution cannot shrink further
            settled = max(settled, float(ub[~splittable].max()))
            a, b, fa, fb, L, ub, m = (v[splittable] for v in (a, b, fa, fb, L, ub, m))
            if not a.size:
                continue
        room = q.budget - evals
        if room <= 0:
            exhausted = True
            break
        order = np.argsort(-ub, kind="stable")
        pick = np.zeros(a.shape, dtype=bool)
        pick[order[:room]] = True
        if not np.all(pick):
            exhausted = True
        m = m[pick]
        fm = _evaluate(q.objective, m)
        evals += m.size
        k = int(np.argmax(fm))
        if fm[k] > lower:
            lower, arg = float(fm[k]), float(m[k])
        pa, pb, pfa, pfb, pL = a[pick], b[pick], fa[pick], fb[pick], L[pick]
        na = np.concatenate([pa, m, a[~pick]])
        nb = np.concatenate([m, pb, b[~pick]])
        nfa = np.concatenate([pfa, fm, fa[~pick]])
        nfb = np.concatenate([fm, pfb, fb[~pick]])
        parentL = np.concatenate([pL, pL, L[~pick]])
        fresh = slope_bounds(na[: 2 * m.size], nb[: 2 * m.size], nfa[: 2 * m.size], nfb[: 2 * m.size])
        childL = np.concatenate([fresh, L[~pick]])
        a, b, fa, fb = na, nb, nfa, nfb
        # a child's slope bound never exceeds its parent's (keeps refinement monotone)
        L = np.minimum(childL, parentL)
    upper = max(lower, settled, float(ub.max()) if ub.size else -math.inf)
    return Bounds(lower, upper, heuristic_upper=heuristic, exhausted=exhausted, argmax=arg)


# ---------------------------------------------------------------------------
# comp / dist terms


def _difference_term(f: PCMap, i: int, g: PCMap, k: int, j: int, cell: tuple[float, float],
                     g_cell: tuple[float, float], opts: KernelOptions) -> Bounds:
    """sup over ``cell`` of |f_i^(j)(x) - g_k^(j)(phi(x))| with phi the increasing
    affine map from ``cell`` onto ``g_cell``."""
    s = (g_cell[1] - g_cell[0]) / (cell[1] - cell[0])

    def objective(x):
        fx = _branch_jets(f, i, x, j)[j]
        gx = _branch_jets(g, k, affine_between(x, cell, g_cell), j)[j]
        return np.abs(fx - gx)

    clamped = j == 0 and (f.clamp or g.clamp)
    reparam = f.reparam is not None or g.reparam is not None
    centered = not clamped and not reparam

    def slope(a, b):
        ga = np.nextafter(affine_between(a, cell, g_cell), -np.inf)
        gb = np.nextafter(affine_between(b, cell, g_cell), np.inf)
        F = _branch_jets_interval(f, i, a, b, j + 1)
        G = _branch_jets_interval(g, k, ga, gb, j + 1)
        if clamped:
            return F[j + 1].mag() + s * G[j + 1].mag()
        bound = (F[j + 1] - G[j + 1] * s).mag()
        if centered:
            mid = 0.5 * (a + b)
            gm = affine_between(mid, cell, g_cell)
            Fm = jets_interval(f.branches[i - 1], mid, mid, j + 1)
            Gm = jets_interval(g.branches[k - 1], gm, gm, j + 1)
            F2 = jets_interval(f.branches[i - 1], a, b, j + 2)
            G2 = jets_interval(g.branches[k - 1], ga, gb, j + 2)
            curv = (F2[j + 2] - G2[j + 2] * (s * s)).mag()
            alt = (Fm[j + 1] - Gm[j + 1] * s).mag() + curv * (0.5 * (b - a))
            bound = np.minimum(bound, np.where(np.isnan(alt), np.inf, alt))
        return np.where(np.isnan(bound), np.inf, bound)

    q = SupQuery(objective, IntervalPair(*cell), opts.budget, opts.tol, slope, opts.initial_samples)
    out = certified_sup(q)
    # rounding in the objective itself: relative to the magnitudes involved
    probe = np.linspace(cell[0], cell[1], 33)
    scale = float(np.max(np.abs(_branch_jets(f, i, probe, j)[j]))
                  + np.max(np.abs(_branch_jets(g, k, affine_between(probe, cell, g_cell), j)[j])))
    margin = 16 * _EPS * (scale + out.upper) + 1e-300
    return Bounds(max(out.lower - margin, 0.0), out.upper + margin, out.heuristic_upper,
                  out.exhausted, out.argmax)


def _run_terms(jobs: list, threads: int) -> list[Bounds]:
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda job: job(), jobs))
    return [job() for job in jobs]


def _breakpoint_term(f: PCMap, g: PCMap) -> Bounds:
    cf, cg = np.asarray(f.breakpoints), np.asarray(g.breakpoints)
    d = math.fsum(abs(float(x) - float(y)) for x, y in zip(cf, cg))
    margin = 4 * len(cf) * _EPS * (float(np.max(np.abs(np.concatenate([cf, cg])))) if cf.size else 0.0)
    return Bounds(max(d - margin, 0.0), d + margin)


def _check_order(f: PCMap, g: PCMap, r: int) -> None:
    if r < 0:
        raise ValueError("order must be non-negative")
    if r > min(f.order, g.order):
        raise OrderTooHigh(f"r={r} exceeds min(order_f, order_g) = {min(f.order, g.order)}",
                           {"r": r, "orders": [f.order, g.order]})


def comp_metric(f: PCMap, g: PCMap, r: int = 0, opts: KernelOptions | None = None) -> Bounds:
    """Breakpoint displacement plus, per piece and derivative order, the sup of
    |f_i^(j)(x) - g_i^(j)(xi(x))| over the closed piece of f, where xi is the
    piecewise-affine deformation from f's pieces to g's."""
    check_same_shape(f, g)
    _check_order(f, g, r)
    opts = opts or KernelOptions()
    jobs = []
    for i in range(1, f.N + 1):
        pf, pg = f.piece(i), g.piece(i)
        for j in range(r + 1):
            if pf == pg and f.same_branch(g, i):
                jobs.append(lambda: ZERO)
            else:
                jobs.append(lambda i=i, j=j, pf=pf, pg=pg:
                            _difference_term(f, i, g, i, j, pf, pg, opts))
    total = _breakpoint_term(f, g)
    for term in _run_terms(jobs, opts.threads):
        total = total + term
    return total


def dist_inf_metric(f: PCMap, g: PCMap, r: int = 0, opts: KernelOptions | None = None) -> Bounds:
    """Breakpoint displacement plus, per derivative order, the sup of
    |f^(j) - g^(j)| over the cells of the common refinement of both partitions."""
    check_same_shape(f, g)
    _check_order(f, g, r)
    opts = opts or KernelOptions()
    cuts = np.union1d(np.asarray(f.cuts), np.asarray(g.cuts))
    cells = list(zip(cuts[:-1].tolist(), cuts[1:].tolist()))
    mids = np.array([0.5 * (a + b) for a, b in cells])
    pf = np.searchsorted(np.asarray(f.breakpoints), mids) + 1
    pg = np.searchsorted(np.asarray(g.breakpoints), mids) + 1
    jobs = []
    for j in range(r + 1):
        for cell, p, q in zip(cells, pf.tolist(), pg.tolist()):
            if p == q and f.same_branch(g, p):
                jobs.append(lambda: ZERO)
            else:
                jobs.append(lambda cell=cell, p=p, q=q, j=j:
                            _difference_term(f, p, g, q, j, cell, cell, opts))
    results = _run_terms(jobs, opts.threads)
    total = _breakpoint_term(f, g)
    n = len(cells)
    for j in range(r + 1):
        chunk = results[j * n:(j + 1) * n]
        total = total + Bounds(max(t.lower for t in chunk), max(t.upper for t in chunk),
                               any(t.heuristic_upper for t in chunk), any(t.exhausted for t in chunk))
    return total


def sup_of_values(f: PCMap, i: int, sign: float = 1.0, opts: KernelOptions | None = None) -> Bounds:
    """Bracket of ``max sign*f_i`` over the closed piece ``i``."""
    opts = opts or KernelOptions()
    cell = f.piece(i)

    def objective(x):
        return sign * _branch_jets(f, i, x, 0)[0]

    def slope(a, b):
        if f.clamp:
            return _branch_jets_interval(f.with_(clamp=False), i, a, b, 1)[1].mag()
        m = _branch_jets_interval(f, i, a, b, 1)[1].mag()
        return np.where(np.isnan(m), np.inf, m)

    q = SupQuery(objective, IntervalPair(*cell), opts.budget, opts.tol, slope, opts.initial_samples)
    return certified_sup(q)


# ---------------------------------------------------------------------------
# functions on variable intervals


@dataclass(frozen=True)
class FunctionOnInterval:
    """A continuous function with its own compact domain.

    ``fn`` is either an expression in ``x`` (then ``deriv`` selects which of its
    derivatives this element stands for, and slope bounds are certified) or a
    vectorized callable.
    """

    domain: IntervalPair
    fn: Union[Expr, Callable[[np.ndarray], np.ndarray]]
    order: int = 0
    deriv: int = 0

    @property
    def is_expr(self) -> bool:
        return not callable(self.fn)

    def __call__(self, x):
        x = np.asarray(x, float)
        if self.is_expr:
            return jets(self.fn, x, self.deriv)[self.deriv]
        return np.asarray(self.fn(x), float)

    def slope_enclosure(self, a, b) -> iv.Interval:
        return jets_interval(self.fn, a, b, self.deriv + 1)[self.deriv + 1]


def chi_metric(F: FunctionOnInterval, G: FunctionOnInterval,
               opts: KernelOptions | None = None) -> Bounds:
    """Hausdorff distance of the domains plus sup |F(x) - G(phi(x))| with phi
    the increasing affine bijection between the domains."""
    for H in (F, G):
        if not H.domain.lo < H.domain.hi:
            raise DegenerateDomain(f"domain [{H.domain.lo}, {H.domain.hi}] has empty interior",
                                   {"domain": [H.domain.lo, H.domain.hi]})
    opts = opts or KernelOptions()
    src, dst = (F.domain.lo, F.domain.hi), (G.domain.lo, G.domain.hi)
    s = (dst[1] - dst[0]) / (src[1] - src[0])
    dh = hausdorff_interval(F.domain, G.domain)
    if F.domain == G.domain and F.fn == G.fn and F.deriv == G.deriv:
        return Bounds(dh, dh)

    def objective(x):
        return np.abs(F(x) - G(affine_between(x, src, dst)))

    hint = None
    if F.is_expr and G.is_expr:
        def hint(a, b):
            ga = np.nextafter(affine_between(a, src, dst), -np.inf)
            gb = np.nextafter(affine_between(b, src, dst), np.inf)
            m = (F.slope_enclosure(a, b) - G.slope_enclosure(ga, gb) * s).mag()
            return np.where(np.isnan(m), np.inf, m)

    q = SupQuery(objective, F.domain, opts.budget, opts.tol, hint, opts.initial_samples)
    out = certified_sup(q)
    margin = 16 * _EPS * (abs(dh) + out.upper + 1.0)
    return Bounds(max(dh + out.lower - margin, 0.0), dh + out.upper + margin,
                  out.heuristic_upper, out.exhausted)

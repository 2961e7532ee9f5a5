"""Critical points of the branches: interior zeros of f', one-sided boundary
derivatives, and a robustness radius for the interior count."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCritical, HypothesisFails, OrderTooLow
from .metrics import KernelOptions, SupQuery, certified_sup
from .pcmap import IntervalPair, PCMap, _branch_jets, _branch_jets_interval

CENSUS_GRID = 4096
ROOT_WIDTH = 1e-12
ROOT_RESIDUAL = 1e-10
CLUSTER = 1e-9
TANGENCY = 1e-10
DEGENERATE_TOL = 1e-6
HYPOTHESIS_TOL = 1e-6
DELTA_DIVISORS = (8, 16, 32, 64)


@dataclass(frozen=True)
class CritPoint:
    x: float
    piece: int
    residual: float              # f'(x)
    second: float | None         # f''(x) when the order allows it

    def to_dict(self) -> dict:
        return {"x": self.x, "piece": self.piece, "residual": self.residual, "f2": self.second}


@dataclass(frozen=True)
class BoundaryDerivative:
    c: float
    branch: int
    value: float

    def to_dict(self) -> dict:
        return {"c": self.c, "branch": self.branch, "f1": self.value}


@dataclass(frozen=True)
class CritReport:
    internal: tuple[CritPoint, ...]
    boundary: tuple[BoundaryDerivative, ...]
    degenerate: tuple[float, ...]
    tangencies: tuple[float, ...]
    grid_density: int

    @property
    def count(self) -> int:
        return len(self.internal)

    def to_dict(self) -> dict:
        return {"internal": [p.to_dict() for p in self.internal],
                "boundary": [b.to_dict() for b in self.boundary],
                "degenerate": list(self.degenerate),
                "suspected_tangencies": list(self.tangencies),
                "grid_density": self.grid_density}


def _derivative(f: PCMap, i: int, x: np.ndarray, j: int) -> np.ndarray:
    return _branch_jets(f, i, np.asarray(x, float), j)[j]


def bisect_roots(f: PCMap, i: int, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized bisection of f_i' on brackets with a sign change; returns the
    final brackets and the chosen points."""
    lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
    flo = _derivative(f, i, lo, 1)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        active = (hi - lo > ROOT_WIDTH) & (mid > lo) & (mid < hi)
        if not np.any(active):
            break
        fm = _derivative(f, i, mid, 1)
        left = np.sign(fm) == np.sign(flo)
        zero = fm == 0
        lo = np.where(active & left & ~zero, mid, lo)
        flo = np.where(active & left & ~zero, fm, flo)
        hi = np.where(active & ~left & ~zero, mid, hi)
        lo = np.where(active & zero, mid, lo)
        hi = np.where(active & zero, mid, hi)
    # tighten to float resolution where the residual is still large
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        fmid = _derivative(f, i, mid, 1)
        active = (np.abs(fmid) > ROOT_RESIDUAL) & (mid > lo) & (mid < hi)
        if not np.any(active):
            break
        left = np.sign(fmid) == np.sign(flo)
        lo = np.where(active & left, mid, lo)
        flo = np.where(active & left, fmid, flo)
        hi = np.where(active & ~left, mid, hi)
    mid = 0.5 * (lo + hi)
    cands = np.stack([mid, lo, hi])
    vals = np.abs(np.stack([_derivative(f, i, c, 1) for c in cands]))
    pick = np.argmin(vals, axis=0)
    return lo, hi, cands[pick, np.arange(mid.size)]


def critical_census(f: PCMap) -> CritReport:
    if f.order < 1:
        raise OrderTooLow("critical points need order >= 1", {"order": f.order})
    internal, tangencies, degenerate = [], [], []
    for i in range(1, f.N + 1):
        a, b = f.piece(i)
        xs = np.linspace(a, b, CENSUS_GRID)
        xs[-1] = b
        d1 = _derivative(f, i, xs, 1)
        s = np.sign(d1)
        change = (s[:-1] * s[1:]) < 0
        brackets_lo, brackets_hi = xs[:-1][change], xs[1:][change]
        # exact zeros at interior grid points with a sign change across them
        zi = np.nonzero(s == 0)[0]
        exact = [xs[k] for k in zi if 0 < k < len(xs) - 1 and s[k - 1] * s[k + 1] < 0]
        roots = []
        if brackets_lo.size:
            _, _, pts = bisect_roots(f, i, brackets_lo, brackets_hi)
            roots.extend(pts.tolist())
        roots.extend(exact)
        roots = sorted(r for r in roots if a < r < b)
        clustered = []
        for r in roots:
            if not clustered or r - clustered[-1] > CLUSTER:
                clustered.append(r)
        near_sign_change = np.zeros(len(xs), dtype=bool)
        near_sign_change[:-1] |= change
        near_sign_change[1:] |= change
        for k in np.nonzero((np.abs(d1) < TANGENCY) & ~near_sign_change)[0]:
            if 0 < k < len(xs) - 1 and not (s[k] == 0 and s[k - 1] * s[k + 1] < 0):
                tangencies.append(float(xs[k]))
        for r in clustered:
            res = float(_derivative(f, i, np.array([r]), 1)[0])
            second = float(_derivative(f, i, np.array([r]), 2)[0]) if f.order >= 2 else None
            internal.append(CritPoint(float(r), i, res, second))
            if second is not None and abs(second) < DEGENERATE_TOL:
                degenerate.append(float(r))
        if f.order >= 2:
            d2 = _derivative(f, i, xs, 2)
            flat = (np.abs(d1) < DEGENERATE_TOL) & (np.abs(d2) < DEGENERATE_TOL)
            degenerate.extend(float(x) for x in xs[flat])
    boundary = []
    cuts = f.cuts
    for j, c in enumerate(cuts):
        for s in (j, j + 1):
            if 1 <= s <= f.N:
                boundary.append(BoundaryDerivative(float(c), s,
                                                   float(_derivative(f, s, np.array([c]), 1)[0])))
    internal.sort(key=lambda p: p.x)
    return CritReport(tuple(internal), tuple(boundary), tuple(sorted(set(degenerate))),
                      tuple(sorted(set(tangencies))), CENSUS_GRID)


def count_critical(f: PCMap, tol: float = 0.0) -> tuple[int, int]:
    """(#interior critical points, #critical points including boundary points
    whose one-sided derivative vanishes to within ``tol``)."""
    rep = critical_census(f)
    boundary = {b.c for b in rep.boundary if abs(b.value) <= tol}
    return rep.count, rep.count + len(boundary)


@dataclass(frozen=True)
class RadiusCertificate:
    radius: float
    min_first: float        # min |f'| off the neighbourhoods
    min_second: float       # min |f''| on the neighbourhoods (inf if there are none)
    deltas: tuple[float, ...]  # neighbourhood half-width per piece
    heuristic: bool = True
    note: str = ("covers only the explicitly bounded terms; the compactness constants of the "
                 "underlying argument have no formula and are not included")

    def to_dict(self) -> dict:
        return {"radius": self.radius, "heuristic": self.heuristic, "note": self.note,
                "terms": {"min_abs_f1_outside": self.min_first,
                          "min_abs_f2_on_neighborhoods": self.min_second,
                          "delta": list(self.deltas)}}


def _certified_min(f: PCMap, i: int, j: int, lo: float, hi: float, opts: KernelOptions,
                   combo: bool = False):
    """Bounds on min |f_i^(j)| over [lo, hi] (or of |f'|+|f''| with ``combo``)."""

    def objective(x):
        if combo:
            J = _branch_jets(f, i, x, 2)
            return -(np.abs(J[1]) + np.abs(J[2]))
        return -np.abs(_branch_jets(f, i, x, j)[j])

    def slope(a, b):
        if combo:
            J = _branch_jets_interval(f, i, a, b, 3)
            m = J[2].mag() + J[3].mag()
        else:
            m = _branch_jets_interval(f, i, a, b, j + 1)[j + 1].mag()
        return np.where(np.isnan(m), np.inf, m)

    out = certified_sup(SupQuery(objective, IntervalPair(lo, hi), opts.budget, opts.tol, slope,
                                 opts.initial_samples))
    # min = -sup(-|.|): certified lower bound, attained value, location
    return -out.upper, -out.lower, out.argmax


def critical_radius(f: PCMap, opts: KernelOptions | None = None) -> RadiusCertificate:
    """Half the smaller of min|f'| away from the critical points and min|f''|
    near them; neighbours within this comp^2 radius keep the interior count
    between the original count and that plus 2N."""
    if f.order < 2:
        raise OrderTooLow("the radius needs order >= 2", {"order": f.order})
    opts = opts or KernelOptions()
    census = critical_census(f)
    if census.degenerate:
        raise DegenerateCritical(f"degenerate critical point near x={census.degenerate[0]!r}",
                                 {"x": census.degenerate[0]})
    for i in range(1, f.N + 1):
        lo, hi = f.piece(i)
        _, attained, where = _certified_min(f, i, 0, lo, hi, opts, combo=True)
        if attained <= HYPOTHESIS_TOL:
            raise HypothesisFails(f"|f'| + |f''| = {attained!r} at x={where!r} on piece {i}",
                                  {"piece": i, "x": where, "value": attained})
    min_first, min_second = np.inf, np.inf
    deltas = []
    for i in range(1, f.N + 1):
        lo, hi = f.piece(i)
        centers = [p.x for p in census.internal if p.piece == i]
        # boundary points where the one-sided derivative vanishes get one-sided neighbourhoods
        for bd in census.boundary:
            if bd.branch == i and abs(bd.value) < HYPOTHESIS_TOL:
                centers.append(bd.c)
        chosen = None
        for div in DELTA_DIVISORS:
            delta = (hi - lo) / div
            hoods = [(max(lo, x - delta), min(hi, x + delta)) for x in sorted(centers)]
            interior = [x for x in centers if lo < x < hi]
            if any(x - delta <= lo or x + delta >= hi for x in interior):
                continue
            if any(h2[0] <= h1[1] for h1, h2 in zip(hoods, hoods[1:])):
                continue
            mins = [_certified_min(f, i, 2, a, b, opts)[0] for a, b in hoods]
            if all(m > 0 for m in mins):
                chosen = (delta, hoods, min(mins, default=np.inf))
                break
        if chosen is None:
            raise DegenerateCritical(f"could not certify |f''| > 0 near the critical points of piece {i}",
                                     {"piece": i})
        delta, hoods, second = chosen
        deltas.append(delta)
        min_second = min(min_second, second)
        # complement of the open neighbourhoods inside the closed piece
        segments, left = [], lo
        for a, b in hoods:
            if a > left:
                segments.append((left, a))
            left = max(left, b)
        if left < hi:
            segments.append((left, hi))
        for a, b in segments:
            min_first = min(min_first, _certified_min(f, i, 1, a, b, opts)[0])
    radius = 0.5 * min(min_first, min_second)
    if not radius > 0:
        raise HypothesisFails("f' is not bounded away from zero off the critical neighbourhoods",
                              {"min_abs_f1": float(min_first)})
    return RadiusCertificate(float(radius), float(min_first), float(min_second), tuple(deltas))

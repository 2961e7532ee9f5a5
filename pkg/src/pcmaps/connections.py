"""Orbits of one-sided limit values and the finite-horizon no-connection check.

``d_set`` collects the one-sided values at the breakpoints (and the left
endpoint). A map has no connections up to horizon ``n`` when no orbit started
from these values meets a breakpoint during its first ``n`` points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HasConnections
from .metrics import KernelOptions, SupQuery, certified_sup
from .pcmap import (IntervalPair, PCMap, _branch_jets, _branch_jets_interval, _eval_unchecked, locate,
                    xi_deform)

ORBIT_TOL = 1e-11
LIPSCHITZ_GRID = 4096
HEURISTIC_INFLATION = 1.1


@dataclass(frozen=True)
class DPoint:
    value: float
    source: int  # index j of the cut c_j the limit is taken at (0 = left endpoint)
    side: int    # branch index s the value comes from

    def to_dict(self) -> dict:
        return {"value": self.value, "source": self.source, "side": self.side}


def d_set(f: PCMap) -> list[DPoint]:
    """One-sided limit values: f_1(c_0), then f_j(c_j) and f_{j+1}(c_j) for each
    interior breakpoint c_j. Duplicated values keep their own provenance."""
    cuts = f.cuts
    out = [DPoint(float(_branch_jets(f, 1, np.array([cuts[0]]), 0)[0][0]), 0, 1)]
    for j in range(1, f.N):
        c = np.array([cuts[j]])
        for s in (j, j + 1):
            out.append(DPoint(float(_branch_jets(f, s, c, 0)[0][0]), j, s))
    return out


def iterate(f: PCMap, x: float) -> float:
    """One orbit step. Points on a breakpoint are not iterated (callers stop first)."""
    return float(_eval_unchecked(f, np.array([x]))[0])


@dataclass(frozen=True)
class Violation:
    d: DPoint
    k: int
    point: float
    breakpoint: float

    def to_dict(self) -> dict:
        return {"d": self.d.to_dict(), "k": self.k, "orbit_point": self.point,
                "breakpoint": self.breakpoint}


@dataclass(frozen=True)
class ConnectionReport:
    ok: bool
    horizon: int
    d_set: tuple[DPoint, ...]
    first_violation: Violation | None
    min_gap: float
    min_gap_at: tuple[int, int] | None  # (index into d_set, k)
    orbits: tuple[tuple[float, ...], ...]  # computed orbit points per d
    gaps: tuple[tuple[float, ...], ...]
    orbit_tol: float

    def to_dict(self) -> dict:
        out = {"ok": self.ok, "horizon": self.horizon, "orbit_tol": self.orbit_tol,
               "min_gap": self.min_gap, "d_set": [d.to_dict() for d in self.d_set],
               "first_violation": self.first_violation.to_dict() if self.first_violation else None}
        if self.min_gap_at is not None:
            out["min_gap_at"] = {"d_index": self.min_gap_at[0], "k": self.min_gap_at[1]}
        return out

    def trace_rows(self) -> list[tuple[float, int, float, float]]:
        """Rows (d, k, f^k(d), gap) for CSV export."""
        rows = []
        for d, orbit, gaps in zip(self.d_set, self.orbits, self.gaps):
            for k, (p, gap) in enumerate(zip(orbit, gaps)):
                rows.append((d.value, k, p, gap))
        return rows


def check_connections(f: PCMap, n: int, orbit_tol: float = ORBIT_TOL) -> ConnectionReport:
    if n < 1:
        raise ValueError("horizon must be >= 1")
    bps = np.asarray(f.breakpoints)
    ds = d_set(f)
    orbits, gaps = [], []
    first = None
    min_gap, min_at = math.inf, None
    for di, d in enumerate(ds):
        p = d.value
        orbit, gap_list = [], []
        for k in range(n):
            dist = np.abs(bps - p)
            m = int(np.argmin(dist))
            gap = float(dist[m])
            orbit.append(p)
            gap_list.append(gap)
            if gap < min_gap:
                min_gap, min_at = gap, (di, k)
            if gap <= orbit_tol:
                if first is None or k < first.k:
                    first = Violation(d, k, p, float(bps[m]))
                break
            if k + 1 < n:
                p = iterate(f, p)
        orbits.append(tuple(orbit))
        gaps.append(tuple(gap_list))
    return ConnectionReport(first is None, n, tuple(ds), first, float(min_gap), min_at,
                            tuple(orbits), tuple(gaps), orbit_tol)


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    certified: bool
    method: str  # "jet-sup" | "difference-quotient"

    def to_dict(self) -> dict:
        return {"value": self.value, "certified": self.certified, "method": self.method}


def lipschitz_estimate(f: PCMap, opts: KernelOptions | None = None) -> LipschitzEstimate:
    """Largest branch slope: a certified sup of |f'| when r >= 1, otherwise the
    largest difference quotient on a grid, inflated by 10%."""
    if f.order >= 1 and f.reparam is None:
        opts = opts or KernelOptions()
        best = 0.0
        for i in range(1, f.N + 1):
            def objective(x, i=i):
                return np.abs(_branch_jets(f, i, x, 1)[1])

            def slope(a, b, i=i):
                m = _branch_jets_interval(f, i, a, b, 2)[2].mag()
                return np.where(np.isnan(m), np.inf, m)

            q = SupQuery(objective, IntervalPair(*f.piece(i)), opts.budget, opts.tol, slope,
                         opts.initial_samples)
            best = max(best, certified_sup(q).upper)
        return LipschitzEstimate(float(best), True, "jet-sup")
    best = 0.0
    for i in range(1, f.N + 1):
        a, b = f.piece(i)
        xs = np.linspace(a, b, LIPSCHITZ_GRID)
        xs[-1] = b
        ys = _branch_jets(f, i, xs, 0)[0]
        best = max(best, float(np.max(np.abs(np.diff(ys)) / np.diff(xs))))
    return LipschitzEstimate(HEURISTIC_INFLATION * best, False, "difference-quotient")


def geometric_sum(lam: float, n: int) -> float:
    """sum_{j=0}^{n-1} lam^j."""
    return math.fsum(lam ** j for j in range(n))


def connection_radius(f: PCMap, n: int, lam: LipschitzEstimate | float,
                      orbit_tol: float = ORBIT_TOL) -> float:
    """Radius in comp^0 inside which every neighbour keeps the no-connection
    property up to horizon n: min_gap / (4 sum_{j<n} lam^j). Returns 0.0 when the
    gap is within float ambiguity of the orbit tolerance."""
    report = check_connections(f, n, orbit_tol)
    if not report.ok:
        v = report.first_violation
        raise HasConnections(f"orbit of {v.d.value!r} meets breakpoint {v.breakpoint!r} at k={v.k}",
                             v.to_dict())
    if report.min_gap <= 2 * orbit_tol:
        return 0.0
    value = lam.value if isinstance(lam, LipschitzEstimate) else float(lam)
    value = max(value, 1e-12)
    return report.min_gap / (4.0 * geometric_sum(value, n))


def same_piece(f: PCMap, g: PCMap, x: float, y: float) -> bool:
    """Whether x (for f) and y (for g) lie in the same-index piece."""
    return int(locate(f, x)) == int(locate(g, y))


@dataclass(frozen=True)
class ShadowRow:
    d_index: int
    k: int
    deviation: float  # |f^k(d_f) - xi(g, f; g^k(d_g))|
    bound: float      # 2 eps sum_{j<=k} lam^j
    same_piece: bool

    @property
    def ok(self) -> bool:
        return self.deviation < self.bound and self.same_piece


def shadowing_rows(f: PCMap, g: PCMap, n: int, eps: float, lam: LipschitzEstimate | float) -> list[ShadowRow]:
    """Compare the orbits of matching one-sided limits of f and g for k < n.

    The g-orbit is pulled back to f's coordinates by the deformation before
    measuring the deviation.
    """
    lam = lam.value if isinstance(lam, LipschitzEstimate) else float(lam)
    df, dg = d_set(f), d_set(g)
    rows = []
    for di, (a, b) in enumerate(zip(df, dg)):
        p, q = a.value, b.value
        for k in range(n):
            back = float(xi_deform(g, f, q))
            rows.append(ShadowRow(di, k, abs(p - back), 2.0 * eps * geometric_sum(lam, k + 1),
                                  same_piece(f, g, p, q)))
            if k + 1 < n:
                p, q = iterate(f, p), iterate(g, q)
    return rows

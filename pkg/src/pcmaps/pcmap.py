"""Piecewise maps of an interval: model, text format, evaluation and the
piecewise-affine deformation between two maps with the same piece count."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import interval as iv
from .errors import (BreakpointOrderError, EvalDomain, EvalOverflow, FormatError,
                     OrderTooHigh, OutsideDomain, OutsidePiece, PCMError,
                     RangeViolation, ShapeMismatch, SmoothnessError, ValueAtBreakpoint)
from .expr import (MAX_ORDER, Expr, affine_coefficients, const_value, jets,
                   jets_interval, parse_expr, unparse)

RANGE_TOL = 1e-9
VALIDATION_GRID = 1024


@dataclass(frozen=True)
class IntervalPair:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"interval [{self.lo}, {self.hi}] has lo > hi")

    @property
    def length(self) -> float:
        return self.hi - self.lo


def hausdorff_interval(a: IntervalPair, b: IntervalPair) -> float:
    return max(abs(a.lo - b.lo), abs(a.hi - b.hi))


@dataclass(frozen=True)
class HomeoSpec:
    """Increasing piecewise-linear homeomorphism given by its knots."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        xs, ys = np.asarray(self.xs, float), np.asarray(self.ys, float)
        if len(xs) < 2 or len(xs) != len(ys):
            raise ValueError("a homeomorphism needs at least two knots")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise ValueError("knots must be strictly increasing in both coordinates")
        if xs[0] != ys[0] or xs[-1] != ys[-1]:
            raise ValueError("endpoints must be fixed")

    @classmethod
    def identity(cls, lo: float, hi: float) -> "HomeoSpec":
        return cls((lo, hi), (lo, hi))

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.xs, self.ys))

    def __call__(self, x):
        return _pl_eval(np.asarray(self.xs), np.asarray(self.ys), x)

    def inverse(self, y):
        return _pl_eval(np.asarray(self.ys), np.asarray(self.xs), y)

    def slopes(self) -> np.ndarray:
        return np.diff(np.asarray(self.ys)) / np.diff(np.asarray(self.xs))

    def slope_at(self, x, prefer_left) -> np.ndarray:
        """Slope of the segment containing x; at a knot, ``prefer_left`` picks the
        segment to its left (elementwise boolean)."""
        xs = np.asarray(self.xs)
        x = np.asarray(x, float)
        right = np.searchsorted(xs, x, side="right") - 1
        left = np.searchsorted(xs, x, side="left") - 1
        idx = np.where(prefer_left, left, right)
        idx = np.clip(idx, 0, len(xs) - 2)
        return self.slopes()[idx]

    def slope_hull(self, a, b) -> iv.Interval:
        """Enclosure of the slopes of segments meeting each cell [a, b]."""
        xs = np.asarray(self.xs)
        s = self.slopes()
        a, b = np.asarray(a, float), np.asarray(b, float)
        lo = np.full(a.shape, np.inf)
        hi = np.full(a.shape, -np.inf)
        for k in range(len(s)):
            touch = (xs[k] < b) & (xs[k + 1] > a)
            lo = np.where(touch, np.minimum(lo, s[k]), lo)
            hi = np.where(touch, np.maximum(hi, s[k]), hi)
        # degenerate cells sitting on a knot: take both neighbours
        empty = lo > hi
        if np.any(empty):
            lo = np.where(empty, s.min(), lo)
            hi = np.where(empty, s.max(), hi)
        return iv.Interval(np.nextafter(lo, -np.inf), np.nextafter(hi, np.inf))

    def compose(self, inner: "HomeoSpec") -> "HomeoSpec":
        """``self ∘ inner`` as a new knot list."""
        pts = np.union1d(np.asarray(inner.xs), inner.inverse(np.asarray(self.xs)))
        pts = pts[(pts >= inner.xs[0]) & (pts <= inner.xs[-1])]
        ys = self(inner(pts))
        keep = np.concatenate([[True], np.diff(pts) > 0])
        pts, ys = pts[keep], ys[keep]
        pts[0], ys[0] = inner.xs[0], inner.xs[0]
        pts[-1], ys[-1] = inner.xs[-1], inner.xs[-1]
        return HomeoSpec(tuple(float(v) for v in pts), tuple(float(v) for v in ys))


def _pl_eval(xs: np.ndarray, ys: np.ndarray, x):
    """Piecewise-linear interpolation returning knot values exactly at knots."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, float))
    idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
    x0, x1, y0, y1 = xs[idx], xs[idx + 1], ys[idx], ys[idx + 1]
    out = y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    out = np.where(x == x0, y0, np.where(x == x1, y1, out))
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class PCMap:
    """A piecewise map of ``domain`` with ``len(breakpoints)+1`` branches.

    ``reparam`` (optional) is an increasing PL homeomorphism applied before the
    branches: on piece i the map is ``branches[i](reparam(x))``. ``clamp``
    projects values onto the domain.
    """

    domain: tuple[float, float]
    breakpoints: tuple[float, ...]
    branches: tuple[Expr, ...]
    order: int = 0
    reparam: HomeoSpec | None = None
    clamp: bool = False

    @property
    def N(self) -> int:
        return len(self.breakpoints) + 1

    @property
    def cuts(self) -> tuple[float, ...]:
        """``(c0, c1, ..., cN)`` including the domain endpoints."""
        return (self.domain[0],) + tuple(self.breakpoints) + (self.domain[1],)

    @property
    def interval(self) -> IntervalPair:
        return IntervalPair(*self.domain)

    def piece(self, i: int) -> tuple[float, float]:
        """Closed piece ``i`` (1-based)."""
        c = self.cuts
        return c[i - 1], c[i]

    def piece_lengths(self) -> np.ndarray:
        return np.diff(np.asarray(self.cuts))

    def with_(self, **changes) -> "PCMap":
        fields = dict(domain=self.domain, breakpoints=self.breakpoints, branches=self.branches,
                      order=self.order, reparam=self.reparam, clamp=self.clamp)
        fields.update(changes)
        return PCMap(**fields)

    def same_branch(self, other: "PCMap", i: int) -> bool:
        """Whether branch ``i`` is syntactically the same function of x in both maps."""
        return (self.branches[i - 1] == other.branches[i - 1] and self.reparam == other.reparam
                and self.clamp == other.clamp)


# ---------------------------------------------------------------------------
# branch evaluation (no argument checks; vectorized)


def _branch_jets(f: PCMap, i: int, x: np.ndarray, order: int) -> np.ndarray:
    x = np.asarray(x, float)
    node = f.branches[i - 1]
    if f.reparam is None:
        out = jets(node, x, order)
    else:
        h = f.reparam
        hx = h(x)
        slope = h.slope_at(x, prefer_left=(x >= f.piece(i)[1]))
        out = jets(node, hx, order, slope=slope)
    if f.clamp:
        out[0] = np.clip(out[0], f.domain[0], f.domain[1])
    return out


def _branch_jets_interval(f: PCMap, i: int, a, b, order: int) -> list[iv.Interval]:
    node = f.branches[i - 1]
    if f.reparam is None:
        return jets_interval(node, a, b, order)
    if order > 1:
        raise ValueError("reparametrized branches only support first-order enclosures")
    h = f.reparam
    lo = np.nextafter(h(np.asarray(a, float)), -np.inf)
    hi = np.nextafter(h(np.asarray(b, float)), np.inf)
    return jets_interval(node, lo, hi, order, slope=h.slope_hull(a, b))


def _validated_order(f: PCMap, j: int) -> None:
    if j < 0:
        raise ValueError("derivative order must be non-negative")
    if j > f.order:
        raise OrderTooHigh(f"derivative order {j} exceeds the map order {f.order}",
                           {"j": j, "order": f.order})


def branch_value(f: PCMap, i: int, j: int, x):
    """Derivative ``j`` of branch ``i`` at ``x`` in the closed piece ``i``."""
    if not 1 <= i <= f.N:
        raise OutsidePiece(f"piece index {i} not in 1..{f.N}", {"i": i})
    _validated_order(f, j)
    lo, hi = f.piece(i)
    xs = np.atleast_1d(np.asarray(x, float))
    bad = ~((xs >= lo) & (xs <= hi))
    if np.any(bad):
        x0 = float(xs[bad][0])
        raise OutsidePiece(f"x={x0!r} is outside closed piece {i} = [{lo!r}, {hi!r}]",
                           {"i": i, "x": x0})
    vals = _branch_jets(f, i, xs, j)[j]
    return float(vals[0]) if np.ndim(x) == 0 else vals


def locate(f: PCMap, x) -> np.ndarray:
    """1-based index of the piece containing each x (breakpoints go right)."""
    idx = np.searchsorted(np.asarray(f.breakpoints), np.asarray(x, float), side="right") + 1
    return np.minimum(idx, f.N)


def eval_map(f: PCMap, x):
    """Value of the map at x (scalar or array); undefined at interior breakpoints."""
    xs = np.atleast_1d(np.asarray(x, float))
    lo, hi = f.domain
    outside = ~((xs >= lo) & (xs <= hi))
    if np.any(outside):
        x0 = float(xs[outside][0])
        raise OutsideDomain(f"x={x0!r} is outside [{lo!r}, {hi!r}]", {"x": x0})
    at_bp = np.isin(xs, np.asarray(f.breakpoints))
    if np.any(at_bp):
        x0 = float(xs[at_bp][0])
        raise ValueAtBreakpoint(f"map value undefined at breakpoint x={x0!r}", {"x": x0})
    out = _eval_unchecked(f, xs)
    return float(out[0]) if np.ndim(x) == 0 else out


def _eval_unchecked(f: PCMap, xs: np.ndarray) -> np.ndarray:
    pieces = locate(f, xs)
    out = np.empty(xs.shape)
    for i in range(1, f.N + 1):
        sel = pieces == i
        if np.any(sel):
            out[sel] = _branch_jets(f, i, xs[sel], 0)[0]
    return out


# ---------------------------------------------------------------------------
# deformation


def check_same_shape(f: PCMap, g: PCMap) -> None:
    if f.domain != g.domain:
        raise ShapeMismatch(f"different domains {f.domain} and {g.domain}",
                            {"domains": [list(f.domain), list(g.domain)]})
    if f.N != g.N:
        raise ShapeMismatch(f"different piece counts {f.N} and {g.N}", {"N": [f.N, g.N]})


def affine_between(x, src: tuple[float, float], dst: tuple[float, float]):
    """Increasing affine map src -> dst, anchored at the right endpoint and exact
    at both endpoints."""
    x = np.asarray(x, float)
    if src == dst:
        return x.copy()
    s = (dst[1] - dst[0]) / (src[1] - src[0])
    y = s * (x - src[1]) + dst[1]
    return np.where(x == src[0], dst[0], np.where(x == src[1], dst[1], y))


def xi_deform(f: PCMap, g: PCMap, x):
    """The increasing PL homeomorphism sending each closed piece of f onto the
    matching piece of g."""
    check_same_shape(f, g)
    xs = np.atleast_1d(np.asarray(x, float))
    lo, hi = f.domain
    outside = ~((xs >= lo) & (xs <= hi))
    if np.any(outside):
        x0 = float(xs[outside][0])
        raise OutsideDomain(f"x={x0!r} is outside [{lo!r}, {hi!r}]", {"x": x0})
    # a point on a breakpoint belongs to the piece on its left: right anchor is exact there
    pieces = np.searchsorted(np.asarray(f.breakpoints), xs, side="left") + 1
    out = np.empty(xs.shape)
    for i in range(1, f.N + 1):
        sel = pieces == i
        if np.any(sel):
            out[sel] = affine_between(xs[sel], f.piece(i), g.piece(i))
    return float(out[0]) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# validation


def validate_map(f: PCMap, grid: int = VALIDATION_GRID) -> PCMap:
    """Check ordering, smoothness and range; returns ``f`` unchanged."""
    lo, hi = f.domain
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise FormatError(f"domain [{lo!r}, {hi!r}] must be a finite interval with lo < hi",
                          {"domain": [lo, hi]})
    if not 0 <= f.order <= MAX_ORDER:
        raise FormatError(f"order must be in 0..{MAX_ORDER}", {"order": f.order})
    if f.N < 2:
        raise FormatError("a map needs at least one breakpoint", None)
    cuts = f.cuts
    for k in range(len(cuts) - 1):
        if not cuts[k] < cuts[k + 1] or not math.isfinite(cuts[k + 1]):
            raise BreakpointOrderError("breakpoints must be strictly increasing and interior",
                                       {"breakpoints": list(f.breakpoints)})
    if len(f.branches) != f.N:
        raise FormatError(f"expected {f.N} branches, got {len(f.branches)}",
                          {"expected": f.N, "got": len(f.branches)})
    if f.reparam is not None:
        if f.order > 0:
            raise FormatError("a piecewise-linear reparametrization requires order 0", None)
        if (f.reparam.xs[0], f.reparam.xs[-1]) != f.domain:
            raise FormatError("reparametrization must fix the domain endpoints", None)
    for i in range(1, f.N + 1):
        _validate_piece(f, i, grid)
    return f


def _validate_piece(f: PCMap, i: int, grid: int) -> None:
    a, b = f.piece(i)
    xs = np.linspace(a, b, grid)
    xs[-1] = b
    try:
        vals = _branch_jets(f, i, xs, f.order)
    except (EvalDomain, EvalOverflow) as err:
        x0 = (err.witness or {}).get("x")
        raise SmoothnessError(f"branch {i} is not smooth on its closed piece: {err.message}",
                              {"piece": i, "x": x0}) from None
    finite = np.all(np.isfinite(vals), axis=0)
    if not np.all(finite):
        x0 = float(xs[~finite][0])
        raise SmoothnessError(f"branch {i} has a non-finite jet at x={x0!r}", {"piece": i, "x": x0})
    if f.clamp:
        return
    lo, hi = f.domain
    aff = affine_coefficients(f.branches[i - 1]) if f.reparam is None else None
    if aff is not None:
        ends = vals[0][[0, -1]]
        for x0, v in zip((a, b), ends):
            if v > hi + RANGE_TOL or v < lo - RANGE_TOL:
                raise RangeViolation(f"branch {i} leaves the domain: f({x0!r}) = {v!r}",
                                     {"piece": i, "x": float(x0), "value": float(v)})
        return
    from .metrics import sup_of_values  # metrics imports this module

    for sign in (1.0, -1.0):
        try:
            bounds = sup_of_values(f, i, sign)
        except (EvalDomain, EvalOverflow) as err:
            raise SmoothnessError(f"branch {i} is not smooth on its closed piece: {err.message}",
                                  {"piece": i, "x": (err.witness or {}).get("x")}) from None
        if not math.isfinite(bounds.upper):
            raise SmoothnessError(f"branch {i} is unbounded near x={bounds.argmax!r}",
                                  {"piece": i, "x": bounds.argmax})
        limit = hi if sign > 0 else -lo
        if bounds.upper > limit + RANGE_TOL:
            v = sign * bounds.lower
            raise RangeViolation(f"branch {i} leaves the domain: f({bounds.argmax!r}) = {v!r}",
                                 {"piece": i, "x": bounds.argmax, "value": v})


def build_map(domain, breakpoints, branches, order: int = 0, reparam: HomeoSpec | None = None,
              clamp: bool = False) -> PCMap:
    """Construct and validate a map; branches may be text or ASTs."""
    asts = tuple(parse_expr(b) if isinstance(b, str) else b for b in branches)
    f = PCMap((float(domain[0]), float(domain[1])), tuple(float(c) for c in breakpoints),
              asts, int(order), reparam, bool(clamp))
    return validate_map(f)


# ---------------------------------------------------------------------------
# text format

_BRANCH_KEY = re.compile(r"^branch\s+(\d+)$")
_PAIR = re.compile(r"\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)")


def _number(text: str, line: int) -> float:
    try:
        node = parse_expr(text.strip())
        return const_value(node)
    except (PCMError, ValueError) as err:
        raise FormatError(f"line {line}: expected a number, got {text.strip()!r}",
                          {"line": line}) from err


def _number_list(text: str, line: int) -> list[float]:
    s = text.strip()
    if not (s.startswith("[") and s.endswith("]")):
        raise FormatError(f"line {line}: expected a bracketed list", {"line": line})
    body = s[1:-1].strip()
    if not body:
        return []
    return [_number(part, line) for part in body.split(",")]


def load_map(document: str, clamp: bool = False) -> PCMap:
    """Parse and validate a map-definition document."""
    values: dict[str, tuple[str, int]] = {}
    branches: list[tuple[int, str, int]] = []
    for lineno, raw in enumerate(document.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value'", {"line": lineno})
        key, value = (p.strip() for p in line.split("=", 1))
        key = " ".join(key.split())
        m = _BRANCH_KEY.match(key)
        if m:
            branches.append((int(m.group(1)), value, lineno))
            continue
        if key not in ("interval", "order", "breakpoints", "reparam", "clamp"):
            raise FormatError(f"line {lineno}: unknown key {key!r}", {"line": lineno})
        if key in values:
            raise FormatError(f"line {lineno}: duplicate key {key!r}", {"line": lineno})
        values[key] = (value, lineno)
    for key in ("interval", "breakpoints"):
        if key not in values:
            raise FormatError(f"missing required key {key!r}", {"key": key})
    domain = _number_list(*values["interval"])
    if len(domain) != 2:
        raise FormatError("interval must have two endpoints", {"line": values["interval"][1]})
    bps = _number_list(*values["breakpoints"])
    order = 0
    if "order" in values:
        text, line = values["order"]
        if not text.isdigit():
            raise FormatError(f"line {line}: order must be a non-negative integer", {"line": line})
        order = int(text)
    n_pieces = len(bps) + 1
    if len(branches) != n_pieces:
        raise FormatError(f"expected {n_pieces} branch lines, found {len(branches)}",
                          {"expected": n_pieces, "got": len(branches)})
    asts = []
    for want, (k, text, line) in enumerate(branches, start=1):
        if k != want:
            raise FormatError(f"line {line}: expected 'branch {want}', found 'branch {k}'",
                              {"line": line})
        try:
            asts.append(parse_expr(text))
        except PCMError as err:
            err.message = f"line {line}: {err.message}"
            err.args = (err.message,)
            raise
    reparam = None
    if "reparam" in values:
        text, line = values["reparam"]
        pairs = [(_number(a, line), _number(b, line)) for a, b in _PAIR.findall(text)]
        try:
            reparam = HomeoSpec(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
        except ValueError as err:
            raise FormatError(f"line {line}: {err}", {"line": line}) from None
    if "clamp" in values:
        text, line = values["clamp"]
        if text not in ("true", "false"):
            raise FormatError(f"line {line}: clamp must be true or false", {"line": line})
        clamp = clamp or text == "true"
    if len(domain) == 2 and not domain[0] < domain[1]:
        raise FormatError("interval must satisfy lo < hi", {"interval": domain})
    f = PCMap((domain[0], domain[1]), tuple(bps), tuple(asts), order, reparam, clamp)
    return validate_map(f)


def load_map_file(path: str | Path, clamp: bool = False) -> PCMap:
    return load_map(Path(path).read_text(encoding="utf-8"), clamp=clamp)


def dump_map(f: PCMap) -> str:
    """Serialize to the map-definition format (round-trips through load_map)."""
    lines = [
        f"interval = [{f.domain[0]!r}, {f.domain[1]!r}]",
        f"order = {f.order}",
        "breakpoints = [" + ", ".join(repr(c) for c in f.breakpoints) + "]",
    ]
    if f.reparam is not None:
        knots = ", ".join(f"({x!r}, {y!r})" for x, y in f.reparam.knots)
        lines.append(f"reparam = [{knots}]")
    if f.clamp:
        lines.append("clamp = true")
    for i, node in enumerate(f.branches, start=1):
        lines.append(f"branch {i} = {unparse(node)}")
    return "\n".join(lines) + "\n"

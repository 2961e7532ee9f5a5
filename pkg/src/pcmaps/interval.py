"""Vectorized interval arithmetic with outward rounding.

An ``Interval`` holds two float arrays ``lo`` and ``hi`` of the same shape; every
operation acts elementwise and rounds its endpoints outward by one ulp with
``np.nextafter``. Only what the jet evaluator needs is implemented.
"""

from __future__ import annotations

import math

import numpy as np

_INF = np.inf
_TWO_PI = 2.0 * math.pi
# absolute slack for sin/cos endpoints (libm error plus the argument reduction above)
_TRIG_SLACK = 4e-16


def _down(v):
    return np.nextafter(v, -_INF)


def _up(v):
    return np.nextafter(v, _INF)


def _nan_to_wide(lo, hi):
    bad = np.isnan(lo) | np.isnan(hi)
    if np.any(bad):
        lo = np.where(bad, -_INF, lo)
        hi = np.where(bad, _INF, hi)
    return lo, hi


class Interval:
    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=float)
        self.lo = lo
        self.hi = lo if hi is None else np.asarray(hi, dtype=float)

    @classmethod
    def point(cls, v) -> "Interval":
        return cls(v, v)

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    # -- helpers ---------------------------------------------------------------

    def mag(self):
        """Largest absolute value in each interval."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, v) -> np.ndarray:
        return (self.lo <= v) & (v <= self.hi)

    @staticmethod
    def _coerce(o) -> "Interval":
        return o if isinstance(o, Interval) else Interval(o, o)

    # -- arithmetic ------------------------------------------------------------

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __add__(self, o):
        o = self._coerce(o)
        return Interval(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __sub__(self, o):
        o = self._coerce(o)
        return Interval(_down(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, o):
        return self._coerce(o) - self

    def __mul__(self, o):
        if not isinstance(o, Interval) and np.ndim(o) == 0:
            s = float(o)
            if s >= 0:
                lo, hi = self.lo * s, self.hi * s
            else:
                lo, hi = self.hi * s, self.lo * s
            lo, hi = _nan_to_wide(lo, hi)
            return Interval(_down(lo), _up(hi))
        o = self._coerce(o)
        with np.errstate(over="ignore", invalid="ignore"):
            p1 = self.lo * o.lo
            p2 = self.lo * o.hi
            p3 = self.hi * o.lo
            p4 = self.hi * o.hi
        lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
        hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
        lo, hi = _nan_to_wide(lo, hi)
        return Interval(_down(lo), _up(hi))

    __rmul__ = __mul__

    def reciprocal(self) -> "Interval":
        straddles = (self.lo <= 0.0) & (self.hi >= 0.0)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lo = _down(1.0 / self.hi)
            hi = _up(1.0 / self.lo)
        lo = np.where(straddles, -_INF, lo)
        hi = np.where(straddles, _INF, hi)
        return Interval(lo, hi)

    def __truediv__(self, o):
        return self * self._coerce(o).reciprocal()

    def __rtruediv__(self, o):
        return self._coerce(o) * self.reciprocal()


def ipow(a: Interval, n: int) -> Interval:
    """Enclosure of a**n for an integer n; negative n goes through the reciprocal."""
    if n < 0:
        return ipow(a, -n).reciprocal()
    if n == 0:
        return Interval(np.ones_like(a.lo), np.ones_like(a.hi))
    if n == 1:
        return a
    with np.errstate(over="ignore"):
        plo, phi = a.lo ** n, a.hi ** n
    if n % 2:
        lo, hi = plo, phi
    else:
        lo = np.where(a.lo >= 0, plo, np.where(a.hi <= 0, phi, 0.0))
        hi = np.where(a.lo >= 0, phi, np.where(a.hi <= 0, plo, np.maximum(plo, phi)))
    # power via libm is within a couple of ulps; widen relative to magnitude
    rel = (n + 2) * np.finfo(float).eps
    return Interval(_down(lo - np.abs(lo) * rel), _up(hi + np.abs(hi) * rel))


def exp(a: Interval) -> Interval:
    with np.errstate(over="ignore"):
        lo = _down(_down(np.exp(a.lo)))
        hi = _up(_up(np.exp(a.hi)))
    return Interval(np.maximum(lo, 0.0), hi)


def _has_point(lo, hi, offset):
    """Whether [lo, hi] contains offset + 2*pi*k for some integer k (conservative)."""
    k_lo = np.ceil((lo - offset) / _TWO_PI - 1e-12)
    k_hi = np.floor((hi - offset) / _TWO_PI + 1e-12)
    return k_lo <= k_hi


def _periodic(a: Interval, f, max_at, min_at) -> Interval:
    lo, hi = a.lo, a.hi
    with np.errstate(invalid="ignore"):
        flo, fhi = f(lo), f(hi)
    out_lo = np.minimum(flo, fhi) - _TRIG_SLACK
    out_hi = np.maximum(flo, fhi) + _TRIG_SLACK
    wide = ~np.isfinite(lo) | ~np.isfinite(hi) | (hi - lo >= _TWO_PI)
    out_hi = np.where(wide | _has_point(lo, hi, max_at), 1.0, out_hi)
    out_lo = np.where(wide | _has_point(lo, hi, min_at), -1.0, out_lo)
    return Interval(np.clip(out_lo, -1.0, 1.0), np.clip(out_hi, -1.0, 1.0))


def sin(a: Interval) -> Interval:
    return _periodic(a, np.sin, 0.5 * math.pi, 1.5 * math.pi)


def cos(a: Interval) -> Interval:
    return _periodic(a, np.cos, 0.0, math.pi)

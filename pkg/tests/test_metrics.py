import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmaps import fixtures
from pcmaps.errors import DegenerateDomain, NonFiniteObjective, OrderTooHigh, ShapeMismatch
from pcmaps.expr import X, parse_expr
from pcmaps.generators import random_map
from pcmaps.metrics import (Bounds, FunctionOnInterval, KernelOptions, SupQuery, certified_sup,
                            chi_metric, comp_metric, dist_inf_metric)
from pcmaps.pcmap import IntervalPair, build_map

from helpers import brute_comp, brute_dist


def test_sup_affine_endpoint():
    q = SupQuery(lambda x: np.abs(x / 2 - x / 4), IntervalPair(0, 0.5),
                 derivative_hint=lambda a, b: np.full(np.shape(a), 0.25))
    b = certified_sup(q)
    assert b.contains(0.125) and b.width <= 1e-9 and not b.heuristic_upper


def test_sup_zero_and_sine():
    b = certified_sup(SupQuery(lambda x: np.zeros_like(x), IntervalPair(0, 1)))
    assert (b.lower, b.upper) == (0.0, 0.0)
    q = SupQuery(np.sin, IntervalPair(0, math.pi), tol=1e-6,
                 derivative_hint=lambda a, b: np.ones(np.shape(a)))
    b = certified_sup(q)
    assert b.contains(1.0) and b.width <= 1e-6


def test_sup_without_hint_is_flagged():
    b = certified_sup(SupQuery(np.sin, IntervalPair(0, math.pi)))
    assert b.heuristic_upper and b.contains(1.0)


def test_sup_budget_exhaustion_is_reported():
    q = SupQuery(lambda x: np.sin(50 * x), IntervalPair(0, 1), budget=64, tol=1e-14,
                 derivative_hint=lambda a, b: np.full(np.shape(a), 50.0), initial_samples=16)
    b = certified_sup(q)
    assert b.exhausted and b.contains(1.0)


def test_sup_rejects_nonfinite():
    with pytest.raises(NonFiniteObjective):
        certified_sup(SupQuery(lambda x: np.where(x > 0.9, np.inf, x), IntervalPair(0, 1)))


def test_comp_collapsing_pair():
    b = comp_metric(fixtures.collapsing_pair(2), fixtures.collapsing_pair(4))
    assert b.contains(0.5) and b.width <= 1e-9


def test_identity_is_exact():
    for f in (fixtures.gap_family(None), fixtures.quadratic_bump(), fixtures.doubling()):
        for r in range(f.order + 1):
            assert comp_metric(f, f, r).upper <= 1e-12
            assert dist_inf_metric(f, f, r).upper <= 1e-12


def test_figure_family_brute_force():
    f = fixtures.gap_family(None, 0)
    fn = fixtures.gap_family(100, 0)
    b = comp_metric(fn, f)
    brute = brute_comp(fn, f, points=1_000_001)
    assert b.upper < 0.05
    assert b.lower - 1e-12 <= brute <= b.upper + 1e-12
    assert dist_inf_metric(fixtures.gap_family(3, 0), f).lower >= 0.5


def test_shrinking_ramp_bound():
    for n, m in ((3, 1), (5, 4), (10, 0)):
        fn, fm = fixtures.shrinking_ramp(n), fixtures.shrinking_ramp(m)
        bound = 0.5 ** (n + 1) + 0.5 ** (m + 1) + 0.5 ** (2 * m + 1)
        assert dist_inf_metric(fn, fm).upper <= bound + 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_metrics_agree_with_brute_force(seed):
    rng = np.random.default_rng(seed)
    N = 2 + seed % 3
    kind = "cubic" if seed % 2 else "affine"
    f = random_map(rng, N, kind, order=1)
    g = random_map(rng, N, kind, order=1)
    for r in (0, 1):
        b = comp_metric(f, g, r)
        assert not b.heuristic_upper and b.width <= 1e-8
        # grid maxima can miss the true sup by about slope * spacing
        grid_err = 1e-4
        assert b.lower - grid_err <= brute_comp(f, g, r) <= b.upper + 1e-12
        d = dist_inf_metric(f, g, r)
        assert d.lower - grid_err <= brute_dist(f, g, r) <= d.upper + 1e-12


def test_threads_give_same_bounds():
    rng = np.random.default_rng(7)
    f, g = random_map(rng, 4, "cubic", order=1), random_map(rng, 4, "cubic", order=1)
    one = comp_metric(f, g, 1, KernelOptions(threads=1))
    four = comp_metric(f, g, 1, KernelOptions(threads=4))
    assert one == four


def test_metric_errors():
    f = fixtures.gap_family(None, 0)
    with pytest.raises(OrderTooHigh):
        comp_metric(f, f, 1)
    with pytest.raises(ShapeMismatch):
        comp_metric(f, build_map((0, 1), [0.3, 0.6], ["x", "x", "x"]))


def test_chi_examples():
    I, H = IntervalPair(0, 1), IntervalPair(0, 0.5)
    assert chi_metric(FunctionOnInterval(I, X), FunctionOnInterval(I, X)) == Bounds(0, 0)
    # dH = 0.5 and sup |x - x/2| = 0.5, so the value is 1.0
    b = chi_metric(FunctionOnInterval(I, X), FunctionOnInterval(H, X))
    xs = np.linspace(0, 1, 100_001)
    brute = 0.5 + np.max(np.abs(xs - xs / 2))
    assert b.contains(1.0) and b.contains(brute)
    # G = F composed with the affine bijection back onto [0, 1]
    F = parse_expr("sin(3*x) + x^2")
    G = parse_expr("sin(3*(x - 0.2)/0.5) + ((x - 0.2)/0.5)^2")
    b = chi_metric(FunctionOnInterval(I, F), FunctionOnInterval(IntervalPair(0.2, 0.7), G))
    assert b.contains(0.3) and b.width <= 1e-9


def test_chi_callable_and_degenerate():
    I = IntervalPair(0, 1)
    b = chi_metric(FunctionOnInterval(I, np.sin), FunctionOnInterval(I, np.cos))
    assert b.heuristic_upper and b.contains(1.0)
    with pytest.raises(DegenerateDomain):
        chi_metric(FunctionOnInterval(IntervalPair(1, 1), X), FunctionOnInterval(I, X))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.4), st.floats(0.6, 1.0), st.floats(0.0, 0.4), st.floats(0.6, 1.0))
def test_chi_affine_pairs(a1, b1, a2, b2):
    I, J = IntervalPair(a1, b1), IntervalPair(a2, b2)
    b = chi_metric(FunctionOnInterval(I, parse_expr("x^2")), FunctionOnInterval(J, parse_expr("x")))
    xs = np.linspace(a1, b1, 20_001)
    phi = a2 + (xs - a1) * (b2 - a2) / (b1 - a1)
    brute = max(abs(a1 - a2), abs(b1 - b2)) + np.max(np.abs(xs ** 2 - phi))
    assert b.lower - 1e-9 <= brute <= b.upper + 1e-12

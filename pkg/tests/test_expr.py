import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmaps import interval as iv
from pcmaps.errors import (EvalDomain, ExprSyntaxError, OrderTooHigh, UnknownIdentifier)
from pcmaps.expr import (Add, Div, Neg, Num, Pow, X, affine_coefficients, const_value,
                         eval_jet, jets, jets_interval, parse_expr, unparse)


def test_parse_shapes():
    assert parse_expr("x/2 + 1/2") == Add(Div(X, Num(2.0)), Div(Num(1.0), Num(2.0)))
    assert parse_expr("-x^2") == Neg(Pow(X, 2))
    assert parse_expr("sin(2*pi*x)").func == "sin"
    assert parse_expr("x^-2") == Pow(X, -2)


@pytest.mark.parametrize("text, offset", [("sin(", 4), ("x +", 3), ("(x", 2), ("x )", 2)])
def test_syntax_error_offset(text, offset):
    with pytest.raises(ExprSyntaxError) as exc:
        parse_expr(text)
    assert exc.value.offset == offset
    assert exc.value.code == "SyntaxError"


def test_bad_identifiers_and_exponents():
    with pytest.raises(UnknownIdentifier):
        parse_expr("y + 1")
    with pytest.raises(UnknownIdentifier):
        parse_expr("tan(x)")
    with pytest.raises(ExprSyntaxError):
        parse_expr("x^65")
    with pytest.raises(ExprSyntaxError):
        parse_expr("x^0.5")


def test_jet_examples():
    assert eval_jet(parse_expr("x^2"), 3.0, 2).coefficients == pytest.approx((9, 6, 2))
    np.testing.assert_allclose(eval_jet(parse_expr("sin(x)"), 0.0, 3).coefficients,
                               (0, 1, 0, -1), atol=1e-15)
    assert eval_jet(parse_expr("x/2 + 1/2"), 0.25, 1).coefficients == pytest.approx((0.625, 0.5))


def test_jet_quotient_and_exp():
    # d^k/dx^k 1/(1+x) at 0 = (-1)^k k!
    c = eval_jet(parse_expr("1/(1 + x)"), 0.0, 4).coefficients
    assert c == pytest.approx((1, -1, 2, -6, 24))
    c = eval_jet(parse_expr("exp(2*x)"), 0.0, 3).coefficients
    assert c == pytest.approx((1, 2, 4, 8))
    c = eval_jet(parse_expr("cos(x)^2 + sin(x)^2"), 0.7, 3).coefficients
    assert c == pytest.approx((1, 0, 0, 0), abs=1e-14)


def test_jet_limits():
    with pytest.raises(OrderTooHigh):
        eval_jet(X, 0.0, 9)
    with pytest.raises(EvalDomain):
        eval_jet(parse_expr("1/x"), 0.0, 0)


def test_vector_jets_match_scalar():
    e = parse_expr("x^3 - 2*x + sin(x)")
    xs = np.linspace(-1, 1, 7)
    J = jets(e, xs, 3)
    for k, x in enumerate(xs):
        assert J[:, k] == pytest.approx(eval_jet(e, float(x), 3).coefficients, abs=1e-14)


def test_interval_jets_enclose_samples():
    e = parse_expr("exp(x)*cos(3*x) - x^2/(2 + x)")
    J = jets_interval(e, 0.1, 0.4, 2)
    xs = np.linspace(0.1, 0.4, 301)
    pts = jets(e, xs, 2)
    for j in range(3):
        assert np.all(J[j].lo <= pts[j]) and np.all(pts[j] <= J[j].hi)


def test_helpers():
    assert affine_coefficients(parse_expr("x/3 + 0.1")) == pytest.approx((1 / 3, 0.1))
    assert affine_coefficients(parse_expr("x^2")) is None
    assert const_value(parse_expr("1/2 + pi")) == pytest.approx(0.5 + math.pi)


_leaf = st.one_of(st.just("x"), st.floats(0.01, 100, allow_nan=False).map(repr), st.just("pi"))


def _combine(children):
    ops = st.sampled_from(["+", "-", "*", "/"])
    binary = st.tuples(children, ops, children).map(lambda t: f"({t[0]} {t[1]} {t[2]})")
    unary = st.tuples(st.sampled_from(["sin", "cos", "exp", "-"]), children).map(
        lambda t: f"{t[0]}({t[1]})")
    power = st.tuples(children, st.integers(-3, 4)).map(lambda t: f"({t[0]})^{t[1]}")
    return st.one_of(binary, unary, power)


expressions = st.recursive(_leaf, _combine, max_leaves=8)


@settings(max_examples=200, deadline=None)
@given(expressions)
def test_round_trip(text):
    tree = parse_expr(text)
    assert parse_expr(unparse(tree)) == tree
    assert unparse(parse_expr(unparse(tree))) == unparse(tree)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(0.01, 0.5))
def test_interval_sin_encloses(lo, w):
    I = iv.sin(iv.Interval(lo, lo + w))
    xs = np.linspace(lo, lo + w, 97)
    v = np.sin(xs)
    assert np.all(I.lo <= v) and np.all(v <= I.hi)


@pytest.mark.parametrize("text", ["x^3", "(2*x)^3", "5*x^3 + x", "x^4", "exp(x)*x^2", "x"])
def test_interval_jets_match_point_jets(text):
    e = parse_expr(text)
    a = np.array([0.3, -1.2])
    pts = jets(e, a, 5)
    enc = jets_interval(e, a, a, 5)
    for j in range(6):
        assert np.all(enc[j].lo <= pts[j]) and np.all(pts[j] <= enc[j].hi)

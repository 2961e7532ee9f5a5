import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmaps import fixtures
from pcmaps.errors import (BreakpointOrderError, FormatError, OrderTooHigh, OutsideDomain,
                           OutsidePiece, RangeViolation, ShapeMismatch, SmoothnessError,
                           ValueAtBreakpoint)
from pcmaps.pcmap import (HomeoSpec, IntervalPair, build_map, branch_value, dump_map, eval_map,
                          hausdorff_interval, load_map, load_map_file, xi_deform)

FIG = """\
# the two-branch map with slopes 1/2
interval = [0, 1]
order = 1
breakpoints = [0.5]
branch 1 = x/2 + 1/2
branch 2 = x/2 - 1/4
"""


def test_load_figure_map():
    f = load_map(FIG)
    assert f.N == 2 and f.order == 1 and f.breakpoints == (0.5,)
    assert eval_map(f, 0.0) == 0.5
    assert eval_map(f, 1.0) == 0.25
    with pytest.raises(ValueAtBreakpoint):
        eval_map(f, 0.5)
    with pytest.raises(OutsideDomain):
        eval_map(f, 1.5)


def test_branch_values(fig_f):
    f = load_map(FIG)
    assert branch_value(f, 1, 0, 0.5) == 0.75
    assert branch_value(f, 2, 0, 0.5) == 0.0
    assert branch_value(f, 1, 1, 0.2) == 0.5
    with pytest.raises(OutsidePiece):
        branch_value(f, 1, 0, 0.7)
    with pytest.raises(OutsidePiece):
        branch_value(f, 3, 0, 0.7)
    with pytest.raises(OrderTooHigh):
        branch_value(fig_f, 1, 1, 0.2)


def test_vector_eval_matches_scalar():
    f = fixtures.contracting()
    xs = np.array([0.0, 0.1, 0.49, 0.51, 1.0])
    assert np.array_equal(eval_map(f, xs), [eval_map(f, float(x)) for x in xs])


@pytest.mark.parametrize("doc, err", [
    (FIG.replace("[0.5]", "[0.5, 0.5]").replace("branch 2 = x/2 - 1/4",
                                                 "branch 2 = x/2 - 1/4\nbranch 3 = x"),
     BreakpointOrderError),
    (FIG.replace("[0.5]", "[1.0]"), BreakpointOrderError),
    (FIG.replace("branch 2 = x/2 - 1/4\n", ""), FormatError),
    (FIG.replace("order = 1", "order = 9"), FormatError),
    (FIG.replace("interval", "domain"), FormatError),
])
def test_load_errors(doc, err):
    with pytest.raises(err):
        load_map(doc)


def test_range_violation_witness():
    with pytest.raises(RangeViolation) as exc:
        build_map((0, 1), [0.5], ["2*x + 5", "x"])
    assert exc.value.witness["x"] == pytest.approx(0.0, abs=0.05)


def test_range_violation_nonlinear():
    with pytest.raises(RangeViolation):
        build_map((0, 1), [0.5], ["4*x*(1 - x) + 0.01", "x"])
    build_map((0, 1), [0.5], ["4*x*(1 - x)", "x"])


def test_smoothness_error():
    with pytest.raises(SmoothnessError):
        build_map((0, 1), [0.5], ["0.1/(x - 0.25)^2", "x"], 0)


def test_clamp_admits_wide_branches():
    doc = FIG.replace("x/2 + 1/2", "2*x + 1") + "clamp = true\n"
    f = load_map(doc)
    assert eval_map(f, 0.3) == 1.0
    assert load_map(dump_map(f)) == f


def test_dump_round_trip(tmp_path):
    for f in (load_map(FIG), fixtures.quadratic_bump(), fixtures.gap_family(7)):
        p = tmp_path / "m.pcm"
        p.write_text(dump_map(f))
        g = load_map_file(p)
        assert g == f
        assert dump_map(g) == dump_map(f)


def test_reparam_round_trip():
    h = HomeoSpec((0.0, 0.3, 1.0), (0.0, 0.35, 1.0))
    f = build_map((0, 1), [0.5], ["x/2 + 1/2", "x/2 - 1/4"], 0, reparam=h)
    assert eval_map(f, 0.3) == pytest.approx(0.35 / 2 + 0.5)
    assert load_map(dump_map(f)) == f


def test_xi_examples():
    f = build_map((0, 1), [0.5], ["x", "x"])
    g = build_map((0, 1), [0.4], ["x", "x"])
    assert xi_deform(f, g, 0.25) == pytest.approx(0.2)
    assert xi_deform(g, f, xi_deform(f, g, 0.25)) == pytest.approx(0.25)
    assert xi_deform(f, g, 0.5) == 0.4
    xs = np.linspace(0, 1, 101)
    assert np.array_equal(xi_deform(f, f, xs), xs)
    h = build_map((0, 2), [0.5], ["x", "x"])
    with pytest.raises(ShapeMismatch):
        xi_deform(f, h, 0.1)


def test_hausdorff_examples():
    assert hausdorff_interval(IntervalPair(0, 1), IntervalPair(0, 1)) == 0
    assert hausdorff_interval(IntervalPair(0, 0.5), IntervalPair(0, 0.25)) == 0.25
    assert hausdorff_interval(IntervalPair(0.1, 0.2), IntervalPair(0.4, 0.9)) == pytest.approx(0.7)


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.floats(-5, 5), st.floats(0.01, 5)), st.tuples(st.floats(-5, 5), st.floats(0.01, 5)))
def test_hausdorff_brute_force(a, b):
    I, J = IntervalPair(a[0], a[0] + a[1]), IntervalPair(b[0], b[0] + b[1])
    xs, ys = np.linspace(I.lo, I.hi, 2001), np.linspace(J.lo, J.hi, 2001)
    def one_sided(u, v):
        return np.max(np.min(np.abs(u[:, None] - v[None, :]), axis=1))
    brute = max(one_sided(xs, ys), one_sided(ys, xs))
    assert hausdorff_interval(I, J) == pytest.approx(brute, abs=5e-3)


def test_homeo_inverse_exact_at_knots():
    h = HomeoSpec((0.0, 0.2, 0.6, 1.0), (0.0, 0.3, 0.5, 1.0))
    for x, y in h.knots:
        assert h(x) == y and h.inverse(y) == x
    xs = np.linspace(0, 1, 1001)
    np.testing.assert_allclose(h.inverse(h(xs)), xs, atol=1e-15)
    k = h.compose(h)
    np.testing.assert_allclose(k(xs), h(h(xs)), atol=1e-15)
    with pytest.raises(ValueError):
        HomeoSpec((0.0, 1.0), (0.1, 1.0))

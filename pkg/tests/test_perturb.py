import numpy as np
import pytest

from pcmaps import fixtures
from pcmaps.connections import check_connections
from pcmaps.errors import (InvalidArgument, NoRoomToMove, OrderCollision, TargetTooFar)
from pcmaps.generators import plant_connection, random_map
from pcmaps.metrics import comp_metric
from pcmaps.pcmap import branch_value, dump_map, eval_map, load_map
from pcmaps.perturb import perturb_breakpoint, random_neighbor, repair_connections


def test_perturb_example(fig_f):
    g = perturb_breakpoint(fig_f, 1, 0.48, 0.76, 0.2)
    assert g.breakpoints == (0.48,)
    assert branch_value(g, 1, 0, 0.48) == 0.76
    # the other one-sided limit is carried along exactly
    assert branch_value(g, 2, 0, 0.48) == 0.0
    d = comp_metric(fig_f, g)
    assert d.upper < 0.2 and d.contains(0.03)


def test_perturb_noop(fig_f):
    g = perturb_breakpoint(fig_f, 1, 0.5, 0.75, 0.2)
    assert g == fig_f
    assert comp_metric(fig_f, g).upper <= 1e-12


def test_perturb_right_side(fig_f):
    g = perturb_breakpoint(fig_f, 1, 0.52, 0.01, 0.2, side="right")
    assert g.breakpoints == (0.52,)
    assert branch_value(g, 2, 0, 0.52) == 0.01
    assert branch_value(g, 1, 0, 0.52) == 0.75


def test_perturb_preconditions(fig_f):
    with pytest.raises(TargetTooFar):
        perturb_breakpoint(fig_f, 1, 0.9, 0.75, 0.2)
    with pytest.raises(TargetTooFar):
        perturb_breakpoint(fig_f, 1, 0.5, 0.9, 0.2)
    f = load_map("interval = [0, 1]\nbreakpoints = [0.3, 0.32]\n"
                 "branch 1 = x\nbranch 2 = x\nbranch 3 = x\n")
    with pytest.raises(OrderCollision):
        perturb_breakpoint(f, 1, 0.33, 0.3, 0.2)
    with pytest.raises(InvalidArgument):
        perturb_breakpoint(fig_f, 1, 0.5, 0.75, 0.2, side="up")


def test_perturb_back_and_forth_is_close():
    f = fixtures.gap_family(None, 1)
    g = perturb_breakpoint(f, 1, 0.49, 0.74, 0.1)
    h = perturb_breakpoint(g, 1, 0.5, 0.75, 0.1)
    assert comp_metric(f, h, 1).upper <= 1e-12


def test_random_neighbor_small_eps(fig_f):
    g = random_neighbor(fig_f, 1e-6, 3)
    assert comp_metric(fig_f, g).upper < 1e-6
    assert random_neighbor(fig_f, 1e-6, 3) == g
    assert dump_map(random_neighbor(fig_f, 1e-6, 3)) == dump_map(g)
    assert random_neighbor(fig_f, 1e-6, 4) != g


def test_random_neighbor_invariants(fig_f):
    for seed in range(100):
        g = random_neighbor(fig_f, 0.01, seed)
        assert 0 < g.breakpoints[0] < 1
        xs = np.linspace(0, 1, 1001)
        xs = xs[~np.isin(xs, g.breakpoints)]
        v = eval_map(g, xs)
        assert np.all((v >= -1e-9) & (v <= 1 + 1e-9))


def test_random_neighbor_higher_order():
    f = fixtures.quadratic_bump()
    g = random_neighbor(f, 0.01, 11)
    assert comp_metric(f, g, 2).upper < 0.01
    with pytest.raises(InvalidArgument):
        random_neighbor(f, 0.4, 0)


def test_repair_noop():
    f = fixtures.contracting()
    res = repair_connections(f, 10, 0.01)
    assert res.map is f and not res.rounds
    assert res.homeo.knots == [(0.0, 0.0), (1.0, 1.0)]


def test_repair_figure_map(fig_f):
    res = repair_connections(fig_f, 10, 0.01, seed=1)
    assert check_connections(res.map, 10).ok
    assert res.comp.upper < 0.01
    assert load_map(dump_map(res.map)) == res.map
    assert comp_metric(fig_f, res.map).upper == res.comp.upper


def test_repair_tiny_budget(fig_f):
    with pytest.raises(NoRoomToMove):
        repair_connections(fig_f, 10, 1e-11)


def test_repair_planted_maps():
    for s in range(6):
        rng = np.random.default_rng(500 + s)
        f = plant_connection(random_map(rng, 2 + s % 3), rng, 10)
        assert not check_connections(f, 10).ok
        res = repair_connections(f, 10, 0.01, seed=s)
        assert res.report.ok and check_connections(res.map, 10).ok
        assert comp_metric(f, res.map).upper < 0.01

import math

import numpy as np
import pytest

from conftest import E2
from narrowchan.analytic import exit_time_quadrature, wing_time_formula
from narrowchan.bvp import solve_exit_bvp
from narrowchan.errors import DivergenceError, PreconditionError
from narrowchan.geometry import ChannelSpec
from narrowchan.graph import GraphPoint, build_graph

POCKET_TIME = (E2 - 1) * (1 - math.exp(-10)) / 2


def _origin(graph):
    return GraphPoint(graph.main_edge_at(0.0).id, 0.0)


def test_single_edge_constant_width(unit_channel):
    g = build_graph(unit_channel)
    u = solve_exit_bvp(g, 1.0, 5.0).value_at(_origin(g))
    assert u == pytest.approx(5.0, abs=1e-6)


def test_single_pocket_wing_source(pocket_graph):
    u = solve_exit_bvp(pocket_graph, 1.0, 5.0, source_kinds={"wing"}).value_at(
        _origin(pocket_graph))
    assert u == pytest.approx(POCKET_TIME, rel=1e-3)
    assert u == pytest.approx(wing_time_formula(1.0, 1.0, 0.0, 1.0, 1.0, 5.0), rel=1e-3)


def test_second_order_convergence(pocket_graph):
    errs = [solve_exit_bvp(pocket_graph, 1.0, 5.0, h=h, source_kinds={"wing"}).value_at(
        _origin(pocket_graph)) - POCKET_TIME for h in (0.04, 0.02, 0.01)]
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 3.5 < r1 < 4.5 and 3.5 < r2 < 4.5


def test_agrees_with_quadrature_across_a_jump():
    spec = ChannelSpec.from_segments([([-16.0, 1.0], [0.5, 0.5], [-0.5, -0.5]),
                                      ([1.0, 6.0], [1.0, 1.0], [-1.0, -1.0])])
    g = build_graph(spec)
    u = solve_exit_bvp(g, 1.0, 5.0).value_at(_origin(g))
    q = exit_time_quadrature(spec, 1.0, 5.0).value
    assert u == pytest.approx(q, rel=1e-5)


def test_sine_channel(sine_channel):
    g = build_graph(sine_channel)
    u = solve_exit_bvp(g, 1.0, 5.0).value_at(_origin(g))
    assert u == pytest.approx(exit_time_quadrature(sine_channel, 1.0, 5.0).value, rel=1e-6)


def test_rejects_bad_inputs(unit_channel):
    g = build_graph(unit_channel)
    with pytest.raises(DivergenceError):
        solve_exit_bvp(g, 0.0, 5.0)
    near = build_graph(ChannelSpec.constant(1.0, (-3.0, 10.0)))
    with pytest.raises(PreconditionError):
        solve_exit_bvp(near, 1.0, 5.0)


def test_rows_cover_all_edges(pocket_graph):
    sol = solve_exit_bvp(pocket_graph, 1.0, 5.0, h=0.05)
    assert {r["edge"] for r in sol.rows()} == set(sol.grids)
    assert all(np.isfinite(r["u"]) for r in sol.rows())

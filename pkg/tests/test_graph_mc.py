import math

import numpy as np
import pytest

from conftest import E2
from narrowchan.errors import ParameterError, PreconditionError
from narrowchan.graph import GraphPoint, build_graph
from narrowchan.graph_mc import (SimParams, mean_exit_time, simulate_exit,
                                 wing_occupation_fraction)

POCKET_TIME = (E2 - 1) * (1 - math.exp(-10)) / 2


@pytest.fixture(scope="module")
def line(unit_channel):
    return build_graph(unit_channel)


def _origin(g):
    return GraphPoint(g.main_edge_at(0.0).id, 0.0)


def test_constant_width_mean(line):
    est = mean_exit_time(line, _origin(line), 5.0, SimParams(dt=1e-3, n_paths=10000, seed=1))
    assert abs(est.mean - 5.0) < 3 * est.stderr
    assert est.ci_low < 5.0 < est.ci_high


def test_start_at_exit_level(line):
    b = simulate_exit(line, GraphPoint(0, 5.0), 5.0, SimParams(dt=1e-3, n_paths=5))
    assert np.all(b.tau == 0.0)


def test_seeded_determinism(pocket_graph):
    p = SimParams(dt=1e-3, n_paths=300, seed=17)
    a = simulate_exit(pocket_graph, _origin(pocket_graph), 5.0, p)
    b = simulate_exit(pocket_graph, _origin(pocket_graph), 5.0, p)
    assert np.array_equal(a.tau, b.tau) and np.array_equal(a.occ_wing, b.occ_wing)


def test_stderr_scaling(line):
    s1 = mean_exit_time(line, _origin(line), 2.0, SimParams(dt=1e-3, n_paths=2000, seed=3)).stderr
    s4 = mean_exit_time(line, _origin(line), 2.0, SimParams(dt=1e-3, n_paths=8000, seed=4)).stderr
    assert 0.7 < 2 * s4 / s1 < 1.3


def test_wingless_occupation_is_zero(line):
    occ = wing_occupation_fraction(line, _origin(line), 3.0, SimParams(dt=1e-3, n_paths=200))
    assert occ.wing.mean == 0.0 and occ.wing_fraction == 0.0


def test_single_pocket_occupations(pocket_graph):
    occ = wing_occupation_fraction(pocket_graph, _origin(pocket_graph), 5.0,
                                   SimParams(dt=1e-3, n_paths=20000, seed=5))
    assert abs(occ.wing.mean - POCKET_TIME) < 3 * occ.wing.stderr
    assert abs(occ.main.mean - 5.0) < 3 * occ.main.stderr


def test_occupations_add_up(pocket_graph):
    b = simulate_exit(pocket_graph, _origin(pocket_graph), 5.0,
                      SimParams(dt=1e-3, n_paths=500, seed=8))
    assert np.allclose(b.occ_main + b.occ_wing, b.tau, rtol=1e-12, atol=1e-9)


def test_tip_reflection_keeps_paths_on_the_pocket(pocket_graph):
    p = SimParams(dt=1e-3, n_paths=20, seed=2)
    b = simulate_exit(pocket_graph, _origin(pocket_graph), 5.0, p, record_paths=20,
                      record_every=1)
    step = 6 * math.sqrt(p.dt)
    for path in b.paths:
        k = path[:, 0].astype(int)
        x = path[:, 1]
        for e in pocket_graph.edges:
            on = k == e.id
            if on.any():
                assert x[on].min() >= e.A - step and x[on].max() <= e.B + step


def test_simple_vertex_law_is_available(pocket_graph):
    b = simulate_exit(pocket_graph, _origin(pocket_graph), 5.0,
                      SimParams(dt=1e-3, n_paths=200, vertex_law="simple"))
    assert b.tau.min() > 0


def test_parameter_checks(pocket_graph):
    with pytest.raises(ParameterError):
        SimParams(dt=-1.0)
    with pytest.raises(ParameterError):
        SimParams(vertex_law="bogus")
    with pytest.raises(PreconditionError):
        simulate_exit(pocket_graph, _origin(pocket_graph), 0.5, SimParams(dt=1e-3, n_paths=2))

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import E2
from narrowchan.analytic import (ScaleSpeed, exit_time_quadrature, inverse_speed,
                                 wing_time_formula, wing_time_terms)
from narrowchan.environment import KEstimate
from narrowchan.errors import DivergenceError, PreconditionError


def _flat_K(value=1.0, t_max=8.0):
    t = np.linspace(0, t_max, 17)
    return KEstimate(t, np.full(t.size, value), np.zeros(t.size), 1e4, 1, 1.0)


def test_constant_width_exit_time():
    r = exit_time_quadrature(1.0, 1.0, 5.0)
    assert r.value == pytest.approx(5.0, abs=1e-10)
    assert r.tail_bound < 1e-10


def test_exit_time_vanishes_at_zero_level():
    assert exit_time_quadrature(1.0, 1.0, 0.0).value == 0.0
    assert exit_time_quadrature(1.0, 1.0, 1e-6).value == pytest.approx(0.0, abs=1e-5)


def test_exit_time_rejects_nonpositive_drift():
    with pytest.raises(DivergenceError):
        exit_time_quadrature(1.0, 0.0, 5.0)


def test_sine_channel_table_and_callable_agree(sine_channel):
    f = lambda x: 1 + 0.5 * np.sin(x)
    a = exit_time_quadrature(f, 1.0, 5.0, l_max=1.5).value
    b = exit_time_quadrature(sine_channel, 1.0, 5.0).value
    assert a == pytest.approx(b, rel=1e-6)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_inverse_speed_flat_kernel(beta):
    est = inverse_speed(_flat_K(), 0.0, 0.0, beta)
    assert est.value == pytest.approx(1.0 / beta, abs=1e-10)
    assert est.speed == pytest.approx(beta)


def test_inverse_speed_bernoulli_kernel():
    t = np.linspace(0, 6, 61)
    K = KEstimate(t, np.where(t <= 1, 1 + t / 8, 9 / 8), np.zeros(t.size), 1e4, 1, 2.0)
    est = inverse_speed(K, 0.0, 0.0, 1.0)
    assert est.value == pytest.approx(17 / 16 - math.exp(-2) / 16, abs=1e-10)


def test_inverse_speed_with_wing_term():
    est = inverse_speed(_flat_K(), 1.0, (E2 - 1) / 4, 1.0)
    assert est.value == pytest.approx(1 + (E2 - 1) / 2, abs=1e-10)


def test_inverse_speed_needs_tail_bound():
    t = np.linspace(0, 3, 4)
    K = KEstimate(t, np.ones(4), np.zeros(4), 10.0, 1, None)
    with pytest.raises(PreconditionError):
        inverse_speed(K, 0.0, 0.0, 1.0)


def test_wing_time_attached_at_origin():
    assert wing_time_formula(1.0, 1.0, 0.0, 1.0, 1.0, math.inf) == pytest.approx((E2 - 1) / 2,
                                                                                   rel=1e-10)


def test_wing_time_finite_level():
    ref = (E2 - 1) * (1 - math.exp(-10)) / 2
    assert wing_time_formula(1.0, 1.0, 0.0, 1.0, 1.0, 5.0) == pytest.approx(ref, rel=1e-10)


def test_wing_time_left_discount():
    ref = math.exp(-10) * (E2 - 1) / 2
    assert wing_time_formula(1.0, 1.0, -5.0, 1.0, 1.0, math.inf) == pytest.approx(ref, rel=1e-8)


def test_empty_wing():
    assert wing_time_formula(1.0, 0.0, 0.0, 1.0, 1.0, 5.0) == 0.0
    assert wing_time_formula(1.0, 1e-9, 0.0, 1.0, 1.0, 5.0) == pytest.approx(0.0, abs=1e-8)


def test_wing_beyond_exit_level():
    with pytest.raises(PreconditionError):
        wing_time_formula(1.0, 1.0, 6.0, 1.0, 1.0, 5.0)


def _shape(c):
    amp, freq, ph = c
    return lambda x: 1.0 + amp * np.sin(freq * np.asarray(x, float) + ph)


shapes = st.tuples(st.floats(0.0, 0.45), st.floats(0.2, 3.0), st.floats(0.0, 6.3))


@given(shapes, shapes, st.floats(-6.0, 4.0), st.floats(-1.0, 1.0).filter(lambda r: abs(r) > 1e-3),
       st.floats(0.3, 2.0))
def test_wing_time_nonnegative_and_discounted(wing_c, main_c, q, r, beta):
    a = 5.0
    lw, l0 = _shape(wing_c), _shape(main_c)
    m = wing_time_terms(lw, r, q, l0, beta, a)
    assert m.W >= 0 and m.M >= 0
    if q < 0:
        m0 = wing_time_terms(lambda x: lw(np.asarray(x) + q), r, 0.0, l0, beta, a)
        assert m.M <= math.exp(2 * beta * q) * m0.M * (1 + 1e-9) + 1e-300 or m0.M == 0


@given(shapes, st.floats(0.3, 2.0))
def test_scale_and_speed_increasing(c, beta):
    ss = ScaleSpeed(_shape(c), beta)
    xs = np.linspace(-3, 3, 25)
    for f in (ss.u, ss.v, ss.q, ss.r):
        assert np.all(np.diff(f(xs)) > 0)
    h = 1e-4
    for x in (-1.3, 0.4, 2.2):
        num = (ss.u(x + h) - ss.u(x - h)) / (2 * h)
        assert num[0] == pytest.approx(float(ss.du(x)), rel=1e-6)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import E2
from narrowchan.environment import (Dist, EnvironmentParams, WingLaw, estimate_K,
                                    sample_environment, wing_counts, wing_moment_estimates,
                                    widths_at)
from narrowchan.errors import InsufficientSampleError, ParameterError
from narrowchan.geometry import validate_assumptions

BERNOULLI = EnvironmentParams(width_law=Dist("choice", values=(1.0, 2.0)),
                              smoothing="piecewise-constant", l_min=1.0, l_max=2.0, seed=2024)

ONE_WING_PER_BLOCK = EnvironmentParams(
    width_law=Dist("constant", value=1.0), wing_prob=1.0,
    wing_law=WingLaw(extent=Dist("constant", value=1.0), level=Dist("constant", value=1.0),
                     tip_radius=0.0),
    l_min=0.5, l_max=2.0, a1=1.0, seed=5)


def test_sampling_is_deterministic():
    p = EnvironmentParams(width_law=Dist("uniform", low=0.7, high=1.6), wing_prob=0.5,
                          l_min=0.5, l_max=2.0, seed=9)
    a = sample_environment(p, (-5.0, 15.0)).to_json()
    b = sample_environment(p, (-5.0, 15.0)).to_json()
    assert a == b


def test_point_mass_gives_constant_channel():
    p = EnvironmentParams(width_law=Dist("constant", value=1.0), seed=3)
    spec = sample_environment(p, (0.0, 10.0))
    assert not spec.wings
    assert np.allclose(spec.l0(np.linspace(0, 10, 101)), 1.0)


def test_one_wing_per_block_count():
    spec = sample_environment(ONE_WING_PER_BLOCK.with_seed(1), (0.0, 101.0))
    inside = [w for w in spec.wings if 0.0 <= w.q and w.q + w.r <= 101.0]
    assert len(inside) in (100, 101)
    spec = sample_environment(ONE_WING_PER_BLOCK.with_seed(1), (-0.5, 100.5))
    assert len(spec.wings) >= 99


@pytest.mark.parametrize("seed", [5, 17, 23])
def test_abutting_pockets_form_a_valid_channel(seed):
    spec = sample_environment(ONE_WING_PER_BLOCK.with_seed(seed), (-20.0, 504.0))
    ends = sorted((w.span for w in spec.wings))
    assert all(hi <= lo for (_, hi), (lo, _) in zip(ends, ends[1:]))
    assert validate_assumptions(spec).ok


def test_invalid_params_rejected():
    with pytest.raises(ParameterError):
        EnvironmentParams(width_law=Dist("uniform", low=0.2, high=1.0), l_min=0.5)
    with pytest.raises(ParameterError):
        EnvironmentParams(wing_prob=1.0, wing_law=WingLaw(extent=Dist("constant", value=3.0)),
                          a1=1.0)
    with pytest.raises(ParameterError):
        EnvironmentParams(wing_prob=0.5, block_length=0.25, n0=1)


def test_K_constant_width():
    p = EnvironmentParams(width_law=Dist("constant", value=1.0))
    K = estimate_K(p, [0.0, 0.5, 1.0, 2.0], 200.0)
    assert np.allclose(K.K_values, 1.0, atol=1e-14)
    assert np.allclose(K.std_errors, 0.0, atol=1e-14)


def test_K_at_zero_is_one():
    K = estimate_K(BERNOULLI, [0.0, 0.3], 500.0)
    assert K.K_values[0] == 1.0


def test_K_bernoulli_closed_form():
    t = np.linspace(0.0, 3.0, 31)
    K = estimate_K(BERNOULLI, t, 4000.0)
    exact = np.where(t <= 1.0, 1.0 + t / 8.0, 9.0 / 8.0)
    assert np.all(np.abs(K.K_values - exact) <= 4 * K.std_errors + 1e-3)


def test_K_needs_long_sample():
    with pytest.raises(InsufficientSampleError):
        estimate_K(BERNOULLI, [0.0, 5.0], 4.0)


def test_wing_moments_without_wings():
    p = EnvironmentParams(width_law=Dist("constant", value=1.0))
    wm = wing_moment_estimates(p, 1.0, 10)
    assert wm.E_n == 0.0 and wm.wing_term == 0.0


def test_wing_moments_deterministic_environment():
    wm = wing_moment_estimates(ONE_WING_PER_BLOCK, 1.0, 20)
    assert wm.E_n == 1.0
    assert wm.wing_term == pytest.approx((E2 - 1) / 4, abs=max(3 * wm.wing_term_stderr, 1e-8))


def test_mixed_sign_wing_term_positive():
    p = EnvironmentParams(width_law=Dist("uniform", low=0.8, high=1.2), wing_prob=0.7,
                          wing_law=WingLaw(extent=Dist("uniform", low=0.1, high=0.5),
                                           p_positive=0.5, level=Dist("constant", value=0.5)),
                          seed=4)
    wm = wing_moment_estimates(p, 1.0, 30)
    assert wm.n_wings > 0 and wm.wing_term > 0


@given(st.integers(0, 2**31), st.floats(0.3, 1.0), st.sampled_from(["pchip", "piecewise-constant"]))
def test_sampled_channels_validate(seed, prob, smoothing):
    p = EnvironmentParams(width_law=Dist("uniform", low=0.6, high=1.8), smoothing=smoothing,
                          wing_prob=prob,
                          wing_law=WingLaw(extent=Dist("uniform", low=0.1, high=0.5),
                                           p_positive=0.5, p_above=0.5,
                                           level=Dist("uniform", low=0.2, high=0.8)),
                          seed=seed)
    spec = sample_environment(p, (-3.0, 9.0))
    rep = validate_assumptions(spec)
    assert rep.ok, str(rep)
    assert wing_counts(spec) <= p.n0


@given(st.integers(0, 2**31), st.floats(0.0, 5.0))
def test_K_within_ratio_bounds(seed, t):
    p = EnvironmentParams(width_law=Dist("uniform", low=0.5, high=2.0), seed=seed)
    K = estimate_K(p, [0.0, t + 1e-3], 60.0, n_batches=10, n_boot=20)
    assert 0.25 <= K.K_values.min() and K.K_values.max() <= 4.0


def test_widths_agree_with_full_sample():
    p = EnvironmentParams(width_law=Dist("uniform", low=0.6, high=1.8), seed=12)
    xs = np.linspace(0.2, 9.7, 40)
    spec = sample_environment(p, (0.0, 10.0))
    # the channel re-tabulates the width on a 1/64 grid
    assert np.allclose(widths_at(p, xs), spec.l0(xs), atol=1e-5)


def test_dependence_range():
    assert EnvironmentParams(smoothing="pchip").dependence_range == 4.0
    assert EnvironmentParams(smoothing="piecewise-constant", block_length=0.5).dependence_range == 1.0

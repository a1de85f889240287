import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from narrowchan.errors import GeometryError, ParameterError, RangeError
from narrowchan.geometry import (ChannelSpec, WingSpec, boundary_normal, cross_section,
                                 validate_assumptions, width_l0)


def test_wingless_cross_section_is_one_interval(unit_channel):
    comps = cross_section(unit_channel, 3.3)
    assert len(comps) == 1
    lo, hi = comps[0]
    assert hi - lo == pytest.approx(1.0, abs=1e-12)


def test_wing_gives_two_disjoint_intervals():
    spec = ChannelSpec.with_wings(1.0, (-5, 10), [WingSpec(2.0, 1.0)])
    comps = cross_section(spec, 2.5)
    assert len(comps) == 2
    (a, b), (c, d) = comps
    assert b < c or d < a


def test_tip_interval_omitted():
    spec = ChannelSpec.with_wings(1.0, (-5, 10), [WingSpec(2.0, 1.0)])
    assert len(cross_section(spec, 3.0)) == 1


def test_cross_section_outside_window(unit_channel):
    with pytest.raises(RangeError):
        cross_section(unit_channel, 11.0)


def test_constant_width(unit_channel):
    w = width_l0(unit_channel, 0.7)
    assert w.left == pytest.approx(1.0) and w.right == pytest.approx(1.0)
    assert not w.is_jump


def test_jump_one_sided_widths():
    spec = ChannelSpec.from_segments([([-2.0, 0.0], [0.5, 0.5], [-0.5, -0.5]),
                                      ([0.0, 2.0], [1.0, 1.0], [-1.0, -1.0])])
    w = width_l0(spec, 0.0)
    assert (w.left, w.right) == (1.0, 2.0)


def test_sine_width_peak(sine_channel):
    # the table is a monotone cubic through 1/64-spaced samples
    assert width_l0(sine_channel, math.pi / 2).right == pytest.approx(1.5, abs=1e-4)


def test_flat_normals(unit_channel):
    up = boundary_normal(unit_channel, (1.0, 0.5), "upper")
    down = boundary_normal(unit_channel, (1.0, -0.5), "lower")
    assert np.allclose(up, (0.0, -1.0), atol=1e-12)
    assert np.allclose(down, (0.0, 1.0), atol=1e-12)


def test_sloped_normal():
    s = 0.3
    spec = ChannelSpec.from_segments([([0.0, 1.0, 2.0], [1.0, 1.0 + s, 1.0 + 2 * s],
                                       [-1.0, -1.0, -1.0])])
    x = 0.5
    n = boundary_normal(spec, (x, float(spec.h_plus(x))), "upper")
    assert np.allclose(n, np.array([s, -1.0]) / math.hypot(s, 1.0), atol=1e-9)


def test_normal_off_boundary(unit_channel):
    with pytest.raises(GeometryError):
        boundary_normal(unit_channel, (1.0, 0.2), "upper")


def test_constant_channel_validates(unit_channel):
    assert validate_assumptions(unit_channel).ok


def test_overlapping_wings_fail():
    spec = ChannelSpec.with_wings(1.0, (-5, 10), [WingSpec(0.0, 1.0), WingSpec(0.5, 1.0)])
    rep = validate_assumptions(spec)
    bad = {c.name: c for c in rep.failures()}
    assert "one_or_two_components" in bad
    assert 0.5 <= bad["one_or_two_components"].x <= 1.0


def test_width_below_bound_reports_location():
    spec = ChannelSpec.from_functions(lambda x: 0.5 - 0.3 * np.exp(-(x - 2.0) ** 2),
                                      lambda x: -0.5 + 0 * x, (0.0, 4.0), l_min=0.8, l_max=2.0)
    fail = [c for c in validate_assumptions(spec).failures() if c.name == "width_bounds"]
    # reported at a point inside the violating interval |x - 2| < sqrt(ln 1.5)
    assert fail and abs(fail[0].x - 2.0) < np.sqrt(np.log(1.5)) + 1e-2


def test_wing_parameters_checked():
    with pytest.raises(ParameterError):
        WingSpec(0.0, 1.0, level=-1.0)
    with pytest.raises(ParameterError):
        WingSpec(0.0, 1.0, tip_radius=2.0)


def test_json_round_trip_is_exact():
    spec = ChannelSpec.with_wings(lambda x: 1 + 0.2 * np.sin(x), (-3.0, 4.0),
                                  [WingSpec(1.0, 0.8, level=0.6), WingSpec(2.5, -0.5, side="below")],
                                  jumps=[-1.0])
    again = ChannelSpec.from_json(spec.to_json())
    assert again.to_json() == spec.to_json()
    xs = np.linspace(-3, 4, 301)
    assert np.array_equal(again.l0(xs), spec.l0(xs))


def _random_spec(draw_widths, wing_qs, extents):
    wings = [WingSpec(q, r) for q, r in zip(wing_qs, extents)]
    return ChannelSpec.with_wings(lambda x: np.interp(x, np.linspace(-4, 8, len(draw_widths)),
                                                      draw_widths),
                                  (-4.0, 8.0), wings, l_min=0.5, l_max=2.0)


@given(st.lists(st.floats(0.6, 1.8), min_size=3, max_size=8),
       st.floats(0.2, 0.9), st.floats(-3.5, 7.5))
def test_cross_sections_disjoint_and_main_matches_width(widths, extent, x):
    spec = _random_spec(widths, [0.0, 3.0], [extent, -extent])
    comps = cross_section(spec, x)
    lo, hi = comps[0]
    assert hi - lo == pytest.approx(width_l0(spec, x).right, abs=1e-12)
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            a, b = comps[i]
            c, d = comps[j]
            assert b < c or d < a


@given(st.floats(-3.9, 7.9), st.sampled_from(["upper", "lower"]))
def test_normals_are_unit_and_point_inward(x, arc):
    spec = _random_spec([1.0, 1.5, 0.8, 1.2], [], [])
    h = spec.h_plus if arc == "upper" else spec.h_minus
    z = float(h(x))
    n = boundary_normal(spec, (x, z), arc)
    assert np.hypot(*n) == pytest.approx(1.0, abs=1e-12)
    lo, hi = cross_section(spec, x)[0]
    inward = np.array([0.0, 0.5 * (lo + hi) - z])
    assert n @ inward >= 0.0

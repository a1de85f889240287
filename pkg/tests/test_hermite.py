import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.interpolate import PchipInterpolator

from narrowchan.hermite import HermiteTable, pchip_slopes


def test_slopes_match_scipy():
    x = np.linspace(0, 3, 13)
    y = np.sin(2 * x) + 0.3 * x
    d = pchip_slopes(x, y)
    ref = PchipInterpolator(x, y).derivative()(x)
    assert np.allclose(d, ref, atol=1e-13)


def test_jump_one_sided_values():
    t = HermiteTable.from_segments([([0.0, 1.0], [1.0, 1.0]), ([1.0, 2.0], [2.0, 2.0])])
    assert t(1.0, "left") == 1.0
    assert t(1.0, "right") == 2.0
    assert list(t.jumps) == [1.0]
    assert t.domain == (0.0, 2.0)


def test_tables_are_read_only():
    t = HermiteTable.from_segments([([0.0, 1.0], [1.0, 2.0])])
    with pytest.raises(ValueError):
        t.y[0] = 5.0


@given(st.lists(st.floats(0.5, 2.0), min_size=3, max_size=12))
def test_extremes_bound_the_interpolant(vals):
    x = np.arange(len(vals), dtype=float)
    t = HermiteTable(x, np.array(vals), pchip_slopes(x, np.array(vals)))
    lo, hi = t.extremes()
    probe = t(np.linspace(0, x[-1], 2001))
    assert lo <= probe.min() + 1e-12 and probe.max() <= hi + 1e-12
    # monotone cubic: no overshoot of the data
    assert lo >= min(vals) - 1e-12 and hi <= max(vals) + 1e-12

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from narrowchan.geometry import ChannelSpec, WingSpec
from narrowchan.graph import build_graph

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

E2 = math.exp(2.0)


@pytest.fixture(scope="session")
def unit_channel():
    return ChannelSpec.constant(1.0, (-20.0, 10.0))


@pytest.fixture(scope="session")
def pocket_spec():
    """Constant width 1, one square-tipped pocket of length 1 at x = 0."""
    return ChannelSpec.with_wings(1.0, (-20.0, 10.0), [WingSpec(0.0, 1.0, tip_radius=0.0)])


@pytest.fixture(scope="session")
def pocket_graph(pocket_spec):
    return build_graph(pocket_spec)


@pytest.fixture(scope="session")
def sine_channel():
    return ChannelSpec.from_functions(lambda x: 0.5 * (1 + 0.5 * np.sin(x)),
                                      lambda x: -0.5 * (1 + 0.5 * np.sin(x)),
                                      (-20.0, 10.0), l_min=0.5, l_max=1.5)

import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wfg.grid import AxisSpec

settings.register_profile("wfg", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("wfg")


@pytest.fixture(scope="session")
def small_axis():
    # +-1 lie on this grid
    return AxisSpec(16.0, 1024)


@pytest.fixture(scope="session")
def mid_axis():
    return AxisSpec(20.0, 512)


@pytest.fixture
def no_alias_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        yield


def gaussian(axis, x0=0.0, xi0=0.0, width=1.0):
    x = axis.grid
    return np.exp(-0.5 * ((x - x0) / width) ** 2 + 1j * xi0 * x)

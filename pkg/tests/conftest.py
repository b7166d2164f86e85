import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tripledeck.spectral import GridSpec

settings.register_profile(
    "repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(Lx=40.0, Nx=64, Ly=30.0, Ny=257)


@pytest.fixture(scope="session")
def mid_grid():
    return GridSpec(Lx=40.0, Nx=128, Ly=30.0, Ny=513)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

import numpy as np
import pytest

from ghostimaging import GaussianSchellParams, TransverseGrid


@pytest.fixture
def near_params():
    return GaussianSchellParams(P=1.0, a0=1e-2, rho0=1e-4, T0=1e-12)


@pytest.fixture
def unit_params():
    return GaussianSchellParams(P=1e4, a0=1.0, rho0=0.5, T0=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fine_grid(params, n=64):
    return TransverseGrid(n, params.rho0 / 4)

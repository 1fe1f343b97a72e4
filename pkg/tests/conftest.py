import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jumpattract.kernels import KernelModel, TorusDomain, gaussian, zero_profile

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def line():
    return TorusDomain(1, 20.0, 128)


@pytest.fixture(scope="session")
def stable_model(line):
    """Gaussian jumps with a narrow repulsive and a wide attractive kernel."""
    return KernelModel(line, gaussian(1.0), gaussian(0.5), gaussian(1.0))


@pytest.fixture(scope="session")
def free_model(line):
    return KernelModel(line, gaussian(1.0), zero_profile(), zero_profile())


@pytest.fixture(scope="session")
def symmetric_model(line):
    return KernelModel(line, gaussian(1.0), gaussian(0.7), gaussian(0.7))


@pytest.fixture(scope="session")
def attractive_model(line):
    return KernelModel(line, gaussian(1.0), zero_profile(), gaussian(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

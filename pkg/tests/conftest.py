import numpy as np
import pytest

from ultracarleman.params import CarlemanParams, DomainParams
from ultracarleman.operators import scaled_identity


@pytest.fixture
def domain():
    return DomainParams(n=2, m=2)


@pytest.fixture
def params():
    return CarlemanParams(gamma=0.125, alpha0=0.5, delta=5.0, lam=1.0, nu=2.0,
                          alpha1=1.0, eps0=0.0625, M=1.0)


@pytest.fixture
def identity_coeffs():
    return scaled_identity(2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

import numpy as np
import pytest

from HypoKernel.funcspace import ModelSpec, heat_model, kolmogorov_model, kramers_model, ou_model
from HypoKernel.quadrature import QuadratureConfig


@pytest.fixture
def heat1():
    return heat_model(1)


@pytest.fixture
def heat2():
    return heat_model(2)


@pytest.fixture
def ou1():
    return ou_model(1)


@pytest.fixture
def kolmogorov():
    return kolmogorov_model(1)


@pytest.fixture
def kramers():
    return kramers_model()


@pytest.fixture
def degenerate():
    """Q = diag(1, 0), B = 0: not hypoelliptic."""
    return ModelSpec(np.diag([1.0, 0.0]), np.zeros((2, 2)), name="degenerate")


@pytest.fixture(params=["heat2", "ou2", "kolmogorov", "kramers"])
def model(request):
    return {
        "heat2": lambda: heat_model(2),
        "ou2": lambda: ou_model(2),
        "kolmogorov": lambda: kolmogorov_model(1),
        "kramers": kramers_model,
    }[request.param]()


@pytest.fixture
def quad():
    return QuadratureConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

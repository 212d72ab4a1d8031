import numpy as np
import pytest

from eqbun import Config, build_torus


@pytest.fixture(scope="session")
def circle():
    return build_torus(1)


@pytest.fixture(scope="session")
def torus2():
    return build_torus(2)


@pytest.fixture(scope="session")
def free_circle():
    return build_torus(1, "free_shift")


@pytest.fixture
def cfg():
    return Config()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

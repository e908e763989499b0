import numpy as np
import pytest

from src.derham_complex import build_complex


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def periodic_p1():
    return build_complex(8, 8, 1)


@pytest.fixture(scope="session")
def periodic_p2():
    return build_complex(8, 8, 2, lengths=(1.0, 2.0))


@pytest.fixture(scope="session")
def wall_p1():
    """Periodic in x, clamped in y."""
    return build_complex(8, 8, 1, boundaries=("periodic", "clamped"))


@pytest.fixture(scope="session")
def small_complex():
    return build_complex(6, 6, 1)

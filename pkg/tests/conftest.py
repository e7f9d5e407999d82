import numpy as np
import pytest

from lakesim.geometry import Disk, Rectangle, build_domain


@pytest.fixture(scope="session")
def disk16():
    return build_domain(Disk(radius=1.0), 16)


@pytest.fixture(scope="session")
def disk32():
    return build_domain(Disk(radius=1.0), 32)


@pytest.fixture(scope="session")
def disk64():
    return build_domain(Disk(radius=1.0), 64)


@pytest.fixture(scope="session")
def square64():
    return build_domain(Rectangle(width=2.0, height=2.0), 64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

import numpy as np
import pytest

from zakharov4d.grid import make_grid


@pytest.fixture(scope="session")
def grid_small():
    return make_grid(128, 30.0)


@pytest.fixture(scope="session")
def grid_medium():
    return make_grid(512, 40.0)


@pytest.fixture(scope="session")
def grid_w():
    # wide grid used for ground-state quadrature checks
    return make_grid(1024, 200.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)

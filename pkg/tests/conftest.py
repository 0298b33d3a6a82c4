import math
from functools import lru_cache

import numpy as np
import pytest

from splab.limit import normalize_mass
from splab.radial import RadialField, RadialGrid


def gaussian(grid: RadialGrid, sigma: float = 1.0) -> RadialField:
    """Unit-mass Gaussian (pi sigma^2)^(-3/4) exp(-r^2 / (2 sigma^2))."""
    r = grid.r
    return RadialField(grid, (math.pi * sigma ** 2) ** -0.75 * np.exp(-r ** 2 / (2 * sigma ** 2)))


@lru_cache(maxsize=None)
def limit_state(p: float = 3.0, n: int = 2048):
    return normalize_mass(p, n=n)


@pytest.fixture(scope="session")
def phi3():
    return limit_state(3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def smooth_field(grid: RadialGrid, rng, scale: float = 1.0) -> RadialField:
    """Random sum of three polynomial-times-Gaussian bumps, length unit ``scale``."""
    r = grid.r / scale
    a = rng.uniform(0.5, 1.5, 3)
    b = rng.uniform(-0.5, 0.5, 3)
    s = rng.uniform(0.7, 1.6, 3)
    v = sum(ai * (1 + bi * (r / si) ** 2) * np.exp(-(r / si) ** 2) for ai, bi, si in zip(a, b, s))
    return RadialField(grid, v)

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import gammalab as gl

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def uniform_1d():
    return gl.builtin_kernel("uniform", 1)


@pytest.fixture(scope="session")
def uniform_2d():
    return gl.builtin_kernel("uniform", 2)


@pytest.fixture(scope="session")
def triangle_1d():
    return gl.builtin_kernel("triangle", 1)


@pytest.fixture(scope="session")
def triangle_2d():
    return gl.builtin_kernel("triangle", 2)


def symmetric_grid(halfwidth: float, n_half: int) -> np.ndarray:
    """Grid symmetric about 0 with exactly mirrored coordinates."""
    right = np.linspace(0.0, halfwidth, n_half + 1)
    return np.concatenate([-right[::-1][:-1], right])

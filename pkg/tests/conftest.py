import pytest

from core.constants import PhysicsConstants
from core.grid import Grid1D, WaveFunction


@pytest.fixture
def natural():
    return PhysicsConstants()


@pytest.fixture
def line_grid():
    """[-20, 20] with dx = 0.05."""
    return Grid1D.spanning(-20.0, 20.0, 0.05)


@pytest.fixture
def packet(line_grid):
    return WaveFunction.gaussian(line_grid, sigma=1.0)

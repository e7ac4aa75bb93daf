"""Shared fixtures: small grids, a rough and a summable spectrum, fixed seeds."""

import numpy as np
import pytest

from roughpde.grid import GridSpec, PhysicalField, grid_points
from roughpde.logs import check_results
from roughpde.noise import CovarianceSpec, SeedSpec


@pytest.fixture
def grid():
    return GridSpec(32, 32)


@pytest.fixture
def small_grid():
    return GridSpec(16, 16)


@pytest.fixture
def rough_spec():
    """Spectrum without a summable tail: renormalization constants diverge."""
    return CovarianceSpec(form="product", lambda1=0.4, lambda2=0.0, alpha=0.7)


@pytest.fixture
def summable_spec():
    return CovarianceSpec(form="product", lambda1=1.5, lambda2=0.0, alpha=0.7)


@pytest.fixture
def seed():
    return SeedSpec(12345)


@pytest.fixture
def trig_field(grid):
    """cos(2 pi x1) + 0.5 sin(2 pi 2 x2): three known modes."""
    x1, x2 = grid_points(grid)
    return PhysicalField(grid, np.cos(2 * np.pi * x1) + 0.5 * np.sin(2 * np.pi * 2 * x2))


@pytest.fixture(autouse=True)
def clear_checks():
    check_results.clear()
    yield
    check_results.clear()

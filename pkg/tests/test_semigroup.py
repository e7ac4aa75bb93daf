#!/usr/bin/env python3
"""
Tests for roughpde.semigroup

Covers:
- Resolvable scales
- Mollification and the semigroup identity
- The x1 commutator against its physical-space oracle
- Kernel moments
"""

import numpy as np
import pytest

from roughpde.grid import GridSpec, PhysicalField, as_physical, grid_points
from roughpde.noise import sample_noise
from roughpde.semigroup import (
    dyadic_scales,
    kernel_moment,
    mollify,
    resolvable,
    semigroup_residual,
    t_min,
    x1_commutator,
    x1_commutator_physical,
)


# ============================================================================
# Scales
# ============================================================================

class TestScales:
    """Test the dyadic scale range."""

    def test_t_min(self, grid):
        """t_min is 16 max(h1^4, h2^2)."""
        assert t_min(grid) == pytest.approx(16.0 / 32 ** 2)

    def test_dyadic_scales(self, grid):
        """Scales run from 1 down to the last power of two above t_min."""
        scales = dyadic_scales(grid)
        assert scales[0] == 1.0
        assert scales[-1] == pytest.approx(2.0 ** -6)
        assert len(scales) == 7
        assert all(a > b for a, b in zip(scales, scales[1:]))

    def test_dyadic_scales_cap(self, grid):
        """j_max caps the range."""
        assert dyadic_scales(grid, j_max=2) == [1.0, 0.5, 0.25]

    def test_resolvable(self, grid):
        """T must lie in (t_min, 1]."""
        assert resolvable(grid, 0.5) is True
        assert resolvable(grid, 2.0) is False
        assert resolvable(grid, t_min(grid)) is False


# ============================================================================
# Mollification
# ============================================================================

class TestMollify:
    """Test f -> f_T."""

    def test_identity_at_zero(self, trig_field):
        """T = 0 is the identity."""
        assert mollify(trig_field, 0.0) is trig_field

    def test_negative_scale(self, trig_field):
        """Negative T is rejected."""
        with pytest.raises(ValueError):
            mollify(trig_field, -0.1)

    def test_single_mode_decay(self, grid):
        """cos(2 pi x2) is damped by exp(-T (2 pi)^2)."""
        _, x2 = grid_points(grid)
        u = PhysicalField(grid, np.cos(2 * np.pi * x2))
        T = 2.0 ** -5
        out = mollify(u, T)
        expected = np.exp(-T * (2 * np.pi) ** 2) * u.values
        assert np.abs(out.values - expected).max() < 1e-14

    def test_semigroup_identity(self, rough_spec, grid, seed):
        """(f_T)_t = f_(T+t) to round-off on noise samples."""
        f = sample_noise(rough_spec, grid, seed)
        for t, T in [(2.0 ** -5, 2.0 ** -6), (2.0 ** -6, 2.0 ** -4), (0.03, 0.02)]:
            assert semigroup_residual(f, t, T) < 1e-13


# ============================================================================
# x1 commutator
# ============================================================================

class TestX1Commutator:
    """Test [x1, (.)_T]."""

    def test_matches_physical_oracle(self, rough_spec, seed):
        """The spectral multiplier agrees with direct convolution against x1 psi_T."""
        small = GridSpec(16, 16)
        f = sample_noise(rough_spec, small, seed, 0, "x1-oracle")
        T = 2.0 ** -3
        spectral = as_physical(x1_commutator(f, T)).values
        physical = x1_commutator_physical(f, T).values
        assert np.abs(spectral - physical).max() <= 1e-8 * np.abs(spectral).max()

    def test_vanishes_on_x2_only_fields(self, grid):
        """A field constant in x1 commutes with multiplication by x1."""
        _, x2 = grid_points(grid)
        u = PhysicalField(grid, np.cos(2 * np.pi * x2))
        assert np.abs(x1_commutator(u, 0.1).values).max() < 1e-14

    def test_positive_scale_required(self, trig_field):
        """T must be positive."""
        with pytest.raises(ValueError):
            x1_commutator(trig_field, 0.0)


# ============================================================================
# Kernel moments
# ============================================================================

class TestKernelMoment:
    """Test integrals of kernel derivatives against the parabolic distance."""

    def test_mass(self):
        """The L1 mass of psi_T is at least its integral 1."""
        mass = kernel_moment((1, 0), 0.0, 0.01)
        assert mass >= 1.0 - 1e-6
        assert mass < 1.5

    @pytest.mark.parametrize("axis,order,power", [(1, 1, -1.0), (1, 2, -2.0), (2, 1, -2.0)])
    def test_parabolic_scaling(self, axis, order, power):
        """Moments scale like (T^(1/4))^(power + alpha)."""
        alpha = 0.5
        small, large = 2.0 ** -12, 2.0 ** -4
        ratio = kernel_moment((axis, order), alpha, small) / kernel_moment((axis, order), alpha, large)
        expected = ((small / large) ** 0.25) ** (power + alpha)
        assert ratio == pytest.approx(expected, rel=1e-3)

    def test_invalid_arguments(self):
        """Axis, order, exponent and scale are checked."""
        with pytest.raises(ValueError):
            kernel_moment((3, 0), 0.0, 0.1)
        with pytest.raises(ValueError):
            kernel_moment((1, 5), 0.0, 0.1)
        with pytest.raises(ValueError):
            kernel_moment((1, 0), -1.0, 0.1)
        with pytest.raises(ValueError):
            kernel_moment((1, 0), 0.0, 0.0)

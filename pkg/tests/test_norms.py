#!/usr/bin/env python3
"""
Tests for roughpde.norms

Covers:
- Parabolic distance
- Sampled and exhaustive Hölder seminorms
- The negative norm
- Modelledness in ball form
- Log-log scaling fits
"""

import numpy as np
import pytest

from roughpde.grid import GridSpec, PhysicalField, as_physical, grid_points
from roughpde.heat import EllipticityError, build_family, interpolate_family, solve_heat
from roughpde.noise import sample_noise
from roughpde.norms import (
    HolderParams,
    c2alpha_seminorm,
    holder_seminorm,
    holder_seminorm_exhaustive,
    modelledness,
    negative_norm,
    parabolic_distance,
    scaling_fit,
    sup_norm,
)
from roughpde.semigroup import dyadic_scales


def constant_field(grid, value):
    return PhysicalField(grid, np.full(grid.shape, value))


# ============================================================================
# Distances and Hölder seminorms
# ============================================================================

class TestHolder:
    """Test the parabolic metric and Hölder seminorms."""

    def test_parabolic_distance(self):
        """d(x, y) = |x1 - y1| + sqrt|x2 - y2|, periodic in both."""
        assert parabolic_distance((0.0, 0.0), (0.25, 0.04)) == pytest.approx(0.45)
        assert parabolic_distance((0.9, 0.0), (0.0, 0.0)) == pytest.approx(0.1)
        assert parabolic_distance((0.0, 0.99), (0.0, 0.0)) == pytest.approx(0.1)

    def test_constant_is_zero(self, grid):
        """Constants have vanishing seminorm."""
        assert holder_seminorm(constant_field(grid, 2.0), 0.5) == 0.0

    def test_sampled_close_to_exhaustive(self, small_grid):
        """Sampling finds the exhaustive maximum of a smooth field."""
        x1, _ = grid_points(small_grid)
        u = PhysicalField(small_grid, np.cos(2 * np.pi * x1))
        sampled = holder_seminorm(u, 0.5)
        exhaustive = holder_seminorm_exhaustive(u, 0.5)
        assert sampled <= exhaustive + 1e-12
        assert sampled >= 0.95 * exhaustive

    def test_sampling_is_seeded(self, rough_spec, grid, seed):
        """The same params give the same estimate."""
        u = as_physical(sample_noise(rough_spec, grid, seed))
        params = HolderParams(0.5, pair_budget=500, seed=3)
        assert holder_seminorm(u, 0.5, params) == holder_seminorm(u, 0.5, params)

    def test_invalid_alpha(self, grid):
        """alpha must lie in (0,1)."""
        with pytest.raises(ValueError):
            holder_seminorm(constant_field(grid, 0.0), 1.0)
        with pytest.raises(ValueError):
            HolderParams(0.0)


# ============================================================================
# Negative norm
# ============================================================================

class TestNegativeNorm:
    """Test max over T of (T^(1/4))^(2-alpha) ||f_T||."""

    def test_zero_field(self, grid):
        """The zero field has zero norm."""
        assert negative_norm(constant_field(grid, 0.0), 0.7, dyadic_scales(grid)) == 0.0

    def test_homogeneous(self, rough_spec, grid, seed):
        """The norm is positively homogeneous."""
        f = sample_noise(rough_spec, grid, seed)
        scales = dyadic_scales(grid)
        assert negative_norm(f.scaled(2.0), 0.7, scales) == pytest.approx(2.0 * negative_norm(f, 0.7, scales))

    def test_sup_norm(self, trig_field):
        """sup_norm is the max modulus over grid points."""
        assert sup_norm(trig_field) == pytest.approx(np.abs(trig_field.values).max())


# ============================================================================
# Modelledness
# ============================================================================

class TestModelledness:
    """Test the ball form of the modelledness constant."""

    @pytest.fixture
    def family(self, rough_spec, grid, seed):
        return build_family(sample_noise(rough_spec, grid, seed), 0.5)

    def test_exactly_modelled(self, family, grid):
        """sigma0 v(., a0) + c is modelled with M at round-off."""
        a0, sigma0 = 0.75, 0.8
        v = as_physical(interpolate_family(family, a0, "v"))
        u = PhysicalField(grid, sigma0 * v.values + 0.3)
        result = modelledness(u, family, constant_field(grid, a0), constant_field(grid, sigma0), 0.7)
        assert result.M <= 1e-9
        assert np.abs(result.nu.values).max() <= 1e-6

    def test_zero_model_is_c2alpha(self, rough_spec, grid, seed):
        """Against the zero model, M is the C^(2 alpha) seminorm."""
        w = as_physical(solve_heat(sample_noise(rough_spec, grid, seed), 1.0))
        M = modelledness(w, None, None, None, 0.7).M
        assert M == pytest.approx(c2alpha_seminorm(w, 0.7), rel=1e-6)

    def test_constant_is_modelled(self, grid):
        """A constant has M = 0 and a table of per-ball rows."""
        result = modelledness(constant_field(grid, 1.5), None, None, None, 0.5)
        assert result.M < 1e-12
        assert {"R", "residual", "scaled", "nu"} <= set(result.table.columns)
        assert len(result.table) > 0

    def test_coefficient_outside_box(self, family, grid):
        """Coefficients outside the family box raise EllipticityError."""
        u = constant_field(grid, 0.0)
        with pytest.raises(EllipticityError):
            modelledness(u, family, constant_field(grid, 1.2), constant_field(grid, 1.0), 0.7)

    def test_family_needs_coefficient(self, family, grid):
        """A family without a coefficient field is a usage error."""
        with pytest.raises(ValueError):
            modelledness(constant_field(grid, 0.0), family, None, constant_field(grid, 1.0), 0.7)


# ============================================================================
# Scaling fits
# ============================================================================

class TestScalingFit:
    """Test log-log fits against T^(1/4)."""

    @staticmethod
    def power_law(slope, scales=(1.0, 0.5, 0.25, 0.125, 0.0625)):
        return [(T, 3.0 * (T ** 0.25) ** slope) for T in scales]

    def test_exact_power_law(self):
        """A pure power law is fitted exactly."""
        report = scaling_fit(self.power_law(-0.6), target_slope=-0.6, tolerance=0.05)
        assert report.slope == pytest.approx(-0.6)
        assert report.r2 == pytest.approx(1.0)
        assert report.passed is True

    def test_slope_outside_tolerance(self):
        """A slope off target fails."""
        report = scaling_fit(self.power_law(-1.0), target_slope=-0.6, tolerance=0.1)
        assert report.passed is False

    def test_bounded_mode(self):
        """Bounded mode passes unless the value blows up as T decreases."""
        assert scaling_fit(self.power_law(0.3), 0.0, 0.1, mode="bounded").passed is True
        assert scaling_fit(self.power_law(-0.5), 0.0, 0.1, mode="bounded").passed is False

    def test_constant_values(self):
        """Constant values give slope 0."""
        report = scaling_fit([(T, 2.0) for T in (1.0, 0.5, 0.25, 0.125)], 0.0, 0.1)
        assert report.slope == 0.0

    def test_to_dict(self):
        """The report serializes its fit and points."""
        out = scaling_fit(self.power_law(0.5), 0.5, 0.1, statistic="demo").to_dict()
        assert out["pass"] is True
        assert out["statistic"] == "demo"
        assert len(out["points"]) == 5

    def test_invalid_inputs(self):
        """Too few points, non-positive values and unknown modes raise."""
        with pytest.raises(ValueError):
            scaling_fit(self.power_law(0.5)[:3], 0.5, 0.1)
        with pytest.raises(ValueError):
            scaling_fit([(1.0, 0.0), (0.5, 1.0), (0.25, 1.0), (0.125, 1.0)], 0.5, 0.1)
        with pytest.raises(ValueError):
            scaling_fit(self.power_law(0.5), 0.5, 0.1, mode="other")

    def test_min_samples_override(self):
        """min_samples lowers the point requirement."""
        report = scaling_fit(self.power_law(0.5)[:2], 0.5, 0.1, min_samples=2)
        assert report.passed is True

#!/usr/bin/env python3
"""
Tests for roughpde.heat

Covers:
- Green symbol and exact a0-derivatives
- Constant-coefficient solves and their residual
- Chebyshev model families and the evaluation operator E
"""

import numpy as np
import pytest

from roughpde.grid import PhysicalField, as_physical
from roughpde.heat import (
    EllipticityBox,
    EllipticityError,
    a0_derivative,
    build_family,
    chebyshev_nodes,
    evaluate_E,
    family_residual,
    green_multiplier,
    green_symbol,
    heat_residual,
    interpolate_family,
    project_range,
    range_mask,
    solve_heat,
    solve_on_box,
    symbol_bound_check,
)
from roughpde.noise import sample_noise


# ============================================================================
# Symbols
# ============================================================================

class TestGreenSymbol:
    """Test G^(k, a0) = 1/(a0 k1^2 + i k2)."""

    def test_single_wavenumber(self):
        """Value at a single k and zero at the origin."""
        assert green_multiplier(1.0, 2.0, 0.5) == pytest.approx(1.0 / (0.5 + 2.0j))
        assert green_multiplier(0.0, 0.0, 0.5) == 0j

    def test_pure_time_mode(self):
        """A time-only mode is inverted by the symbol i k2 of d2."""
        k2 = 2.0 * np.pi
        assert green_multiplier(0.0, k2, 1.0) == pytest.approx(-1j / k2)

    def test_kernel_modes_zero(self, grid):
        """G vanishes at k = 0 and on the x2 Nyquist mode with k1 = 0."""
        green = green_symbol(grid, 0.7)
        assert green[0, 0] == 0
        assert green[0, grid.n2 // 2] == 0
        assert not range_mask(grid)[0, grid.n2 // 2]

    def test_non_positive_a0(self, grid):
        """a0 must be positive."""
        with pytest.raises(ValueError):
            green_symbol(grid, 0.0)

    def test_symbol_bounds(self, grid):
        """|G| (a0 k1^2 + |k2|) lies in [1, sqrt 2]."""
        low, high = symbol_bound_check(grid, 0.6)
        assert low >= 1.0 - 1e-12
        assert high <= np.sqrt(2) + 1e-12

    def test_exact_derivative(self, rough_spec, grid, seed):
        """d v / d a0 matches a central difference of the solves."""
        f = sample_noise(rough_spec, grid, seed)
        a0, h = 0.8, 1e-5
        exact = a0_derivative(f, a0, 1).coeffs
        central = (solve_heat(f, a0 + h).coeffs - solve_heat(f, a0 - h).coeffs) / (2 * h)
        assert np.abs(exact - central).max() <= 1e-6 * np.abs(exact).max()


# ============================================================================
# Solves
# ============================================================================

class TestSolveHeat:
    """Test (d2 - a0 d1^2) v = P f."""

    def test_residual_round_off(self, rough_spec, grid, seed):
        """The solve satisfies the equation on the range to round-off."""
        f = sample_noise(rough_spec, grid, seed)
        v = solve_heat(f, 0.75)
        assert heat_residual(v, f, 0.75) < 1e-13

    def test_mean_zero(self, rough_spec, grid, seed):
        """Solutions are mean-free."""
        v = solve_heat(sample_noise(rough_spec, grid, seed), 1.0)
        assert v.coeffs[0, 0] == 0

    def test_project_range(self, grid):
        """project_range zeroes both kernel modes."""
        out = project_range(PhysicalField(grid, np.ones(grid.shape)))
        assert np.abs(out.values).max() < 1e-14

    def test_solve_on_box(self, rough_spec, grid, seed):
        """solve_on_box refuses a0 outside the box."""
        f = sample_noise(rough_spec, grid, seed)
        box = EllipticityBox(0.5)
        solve_on_box(f, 0.9, box)
        with pytest.raises(EllipticityError):
            solve_on_box(f, 1.5, box)


# ============================================================================
# Ellipticity boxes and families
# ============================================================================

class TestEllipticityBox:
    """Test the admissible a0 range."""

    def test_ranges(self):
        """Stochastic boxes end at 1, deterministic ones at 1/lambda."""
        assert EllipticityBox(0.5).upper == 1.0
        assert EllipticityBox(0.5, "deterministic").upper == 2.0

    def test_invalid(self):
        """lambda must lie in (0,1] and the kind must be known."""
        with pytest.raises(ValueError):
            EllipticityBox(0.0)
        with pytest.raises(ValueError):
            EllipticityBox(0.5, "other")

    def test_nodes_inside(self):
        """Chebyshev nodes are ascending and interior."""
        nodes = chebyshev_nodes(EllipticityBox(0.5), 9)
        assert np.all(np.diff(nodes) > 0)
        assert nodes[0] > 0.5 and nodes[-1] < 1.0


class TestModelFamily:
    """Test the node family and its interpolation."""

    @pytest.fixture
    def family(self, rough_spec, grid, seed):
        return build_family(sample_noise(rough_spec, grid, seed), 0.5)

    def test_nodes_solve_equation(self, family, rough_spec, grid, seed):
        """Every node field solves its constant-coefficient equation."""
        assert family_residual(family, sample_noise(rough_spec, grid, seed)) < 1e-13

    def test_interpolation_accuracy(self, family, rough_spec, grid, seed):
        """Off-node interpolation matches a direct solve closely."""
        f = sample_noise(rough_spec, grid, seed)
        a0 = 0.77
        interpolated = interpolate_family(family, a0, "v").coeffs
        direct = solve_heat(f, a0).coeffs
        assert np.abs(interpolated - direct).max() <= 1e-5 * np.abs(direct).max()

    def test_interpolation_at_node(self, family):
        """At a node the interpolant is the node field."""
        node = family.a0_nodes[3]
        out = interpolate_family(family, node, "v").coeffs
        assert np.abs(out - family.coeffs["v"][3]).max() < 1e-12 * np.abs(out).max()

    def test_all_components(self, family):
        """Without a component name every component is returned."""
        out = interpolate_family(family, 0.8)
        assert set(out) == {"v", "dv", "d2v", "d1sq_v"}

    def test_evaluate_constant_coefficient(self, family, grid):
        """E with a constant a reproduces the interpolant at that value."""
        a0 = 0.66
        a = PhysicalField(grid, np.full(grid.shape, a0))
        evaluated = evaluate_E(family.stack("v"), a).values
        expected = as_physical(interpolate_family(family, a0, "v")).values
        assert np.abs(evaluated - expected).max() < 1e-10 * np.abs(expected).max()

    def test_family_evaluate(self, family, grid):
        """ModelFamily.evaluate is E applied to one component."""
        a = PhysicalField(grid, np.full(grid.shape, 0.9))
        direct = evaluate_E(family.stack("dv"), a).values
        assert np.array_equal(family.evaluate("dv", a).values, direct)

    def test_evaluate_outside_box(self, family, grid):
        """E refuses coefficients outside the box and names the points."""
        values = np.full(grid.shape, 0.7)
        values[2, 3] = 1.4
        with pytest.raises(EllipticityError, match=r"\(2,3\)"):
            evaluate_E(family.stack("v"), PhysicalField(grid, values))

    def test_too_few_nodes(self, rough_spec, grid, seed):
        """At least three nodes are needed."""
        with pytest.raises(ValueError):
            build_family(sample_noise(rough_spec, grid, seed), 0.5, n_nodes=2)

    def test_unknown_component(self, family):
        """Unknown component names raise KeyError."""
        with pytest.raises(KeyError):
            family.stack("w")

#!/usr/bin/env python3
"""
Tests for roughpde.grid

Covers:
- Grid size validation
- Transform pair normalization and Hermitian symmetry
- Diagonal operators on trigonometric fields
- RPF1 snapshots
"""

import numpy as np
import pytest

from roughpde.grid import (
    GridError,
    GridSpec,
    PhysicalField,
    SpectralField,
    as_physical,
    check_hermitian,
    d1,
    d1_squared,
    d2,
    dealias,
    field_from_snapshot,
    forward,
    grid_points,
    inverse,
    load_snapshot,
    make_grid,
    project_mean_zero,
    save_snapshot,
    snapshot_bytes,
    validate_sizes,
)


# ============================================================================
# Grid sizes
# ============================================================================

class TestGridSizes:
    """Test grid size validation."""

    def test_valid_sizes(self):
        """Even sizes of at least 8 are accepted."""
        valid, error = validate_sizes(16, 8)
        assert valid is True
        assert error is None

    @pytest.mark.parametrize("n1,n2", [(15, 16), (16, 6), (4, 4)])
    def test_invalid_sizes(self, n1, n2):
        """Odd or too-small sizes are rejected."""
        valid, error = validate_sizes(n1, n2)
        assert valid is False
        assert "grid sizes" in error

    def test_non_integer_size(self):
        """Floats and bools are not grid sizes."""
        assert validate_sizes(16.0, 16)[0] is False
        assert validate_sizes(True, 16)[0] is False

    def test_gridspec_raises(self):
        """GridSpec refuses invalid sizes with GridError."""
        with pytest.raises(GridError):
            GridSpec(17, 16)

    def test_make_grid(self):
        """make_grid builds the same spec as the constructor."""
        assert make_grid(16, 8) == GridSpec(16, 8)
        with pytest.raises(GridError):
            make_grid(16, 6)

    def test_spacing_and_lattice(self):
        """Spacing is 1/n and the lattice runs over -n/2..n/2-1."""
        grid = GridSpec(16, 8)
        assert grid.h1 == pytest.approx(1 / 16)
        assert grid.h2 == pytest.approx(1 / 8)
        assert grid.j1_vec.min() == -8
        assert grid.j1_vec.max() == 7
        assert grid.k2_vec[1] == pytest.approx(2 * np.pi)

    def test_odd_symbol_drops_nyquist(self):
        """Odd wavenumbers vanish on the Nyquist line."""
        grid = GridSpec(16, 16)
        assert grid.k1_odd_vec[8] == 0.0
        assert grid.k1_vec[8] == pytest.approx(-16 * np.pi)

    def test_index_of_outside_lattice(self):
        """Frequencies outside the lattice raise."""
        grid = GridSpec(8, 8)
        assert grid.index_of(-1, 3) == (7, 3)
        with pytest.raises(GridError):
            grid.index_of(4, 0)


# ============================================================================
# Transforms
# ============================================================================

class TestTransforms:
    """Test the Fourier-series transform pair."""

    def test_cosine_coefficients(self, grid):
        """cos(2 pi x1) has coefficients 1/2 at j1 = +-1."""
        x1, _ = grid_points(grid)
        f = forward(PhysicalField(grid, np.cos(2 * np.pi * x1)))
        assert f.mode(1, 0) == pytest.approx(0.5)
        assert f.mode(-1, 0) == pytest.approx(0.5)
        assert abs(f.mode(0, 0)) < 1e-15

    def test_inverse_recovers_values(self, trig_field):
        """inverse(forward(u)) reproduces u to round-off."""
        back = inverse(forward(trig_field))
        assert np.abs(back.values - trig_field.values).max() < 1e-13

    def test_forward_is_hermitian(self, grid):
        """Coefficients of a real field are Hermitian."""
        rng = np.random.default_rng(0)
        f = forward(PhysicalField(grid, rng.standard_normal(grid.shape)))
        hermitian, deviation = check_hermitian(f)
        assert hermitian is True
        assert deviation < 1e-12

    def test_non_hermitian_detected(self, grid):
        """A single complex mode without its partner is not Hermitian."""
        coeffs = np.zeros(grid.shape, dtype=complex)
        coeffs[grid.index_of(2, 1)] = 1.0 + 1.0j
        hermitian, _ = check_hermitian(SpectralField(grid, coeffs))
        assert hermitian is False

    def test_wrong_kind_raises(self, trig_field):
        """forward needs a physical field, inverse a spectral one."""
        with pytest.raises(TypeError):
            inverse(trig_field)
        with pytest.raises(TypeError):
            forward(forward(trig_field))

    def test_fields_are_immutable(self, trig_field):
        """Field values are read-only."""
        with pytest.raises(ValueError):
            trig_field.values[0, 0] = 1.0

    def test_non_finite_rejected(self, grid):
        """NaN values cannot enter a physical field."""
        values = np.zeros(grid.shape)
        values[0, 0] = np.nan
        with pytest.raises(ValueError):
            PhysicalField(grid, values)

    def test_grid_mismatch(self, grid, small_grid):
        """Arithmetic across grids raises GridError."""
        with pytest.raises(GridError):
            PhysicalField(grid, np.zeros(grid.shape)) + PhysicalField(small_grid, np.zeros(small_grid.shape))


# ============================================================================
# Operators
# ============================================================================

class TestOperators:
    """Test the diagonal operators on known fields."""

    def test_d1_of_cosine(self, grid):
        """d1 cos(2 pi x1) = -2 pi sin(2 pi x1)."""
        x1, _ = grid_points(grid)
        u = PhysicalField(grid, np.cos(2 * np.pi * x1))
        expected = -2 * np.pi * np.sin(2 * np.pi * x1)
        assert np.abs(d1(u).values - expected).max() < 1e-12

    def test_d2_of_sine(self, grid):
        """d2 sin(4 pi x2) = 4 pi cos(4 pi x2)."""
        _, x2 = grid_points(grid)
        u = PhysicalField(grid, np.sin(4 * np.pi * x2))
        assert np.abs(d2(u).values - 4 * np.pi * np.cos(4 * np.pi * x2)).max() < 1e-11

    def test_d1_squared(self, grid):
        """d1^2 cos(2 pi 3 x1) = -(6 pi)^2 cos(2 pi 3 x1)."""
        x1, _ = grid_points(grid)
        u = PhysicalField(grid, np.cos(6 * np.pi * x1))
        assert np.abs(d1_squared(u).values + (6 * np.pi) ** 2 * u.values).max() < 1e-9

    def test_operator_keeps_kind(self, trig_field):
        """Spectral in, spectral out; physical in, physical out."""
        assert isinstance(d1(trig_field), PhysicalField)
        assert isinstance(d1(forward(trig_field)), SpectralField)

    def test_project_mean_zero(self, grid, trig_field):
        """P removes the constant mode only."""
        shifted = PhysicalField(grid, trig_field.values + 3.0)
        projected = project_mean_zero(shifted)
        assert np.abs(projected.values - trig_field.values).max() < 1e-13

    def test_dealias_removes_high_modes(self, grid):
        """Modes beyond n/3 are removed; low modes survive."""
        x1, _ = grid_points(grid)
        low = np.cos(2 * np.pi * 2 * x1)
        high = np.cos(2 * np.pi * 14 * x1)
        out = dealias(PhysicalField(grid, low + high))
        assert np.abs(out.values - low).max() < 1e-12


# ============================================================================
# Snapshots
# ============================================================================

class TestSnapshots:
    """Test the RPF1 snapshot format."""

    def test_physical_snapshot(self, tmp_path, trig_field):
        """A physical snapshot reloads bit-exact."""
        path = save_snapshot(trig_field, tmp_path / "u.rpf")
        loaded = load_snapshot(path)
        assert isinstance(loaded, PhysicalField)
        assert np.array_equal(loaded.values, trig_field.values)

    def test_spectral_snapshot(self, trig_field):
        """A spectral snapshot keeps kind and coefficients."""
        f = forward(trig_field)
        loaded = field_from_snapshot(snapshot_bytes(f))
        assert isinstance(loaded, SpectralField)
        assert np.array_equal(loaded.coeffs, f.coeffs)

    def test_header_layout(self, small_grid):
        """Magic, sizes and kind lead the file; the body is little-endian f64."""
        data = snapshot_bytes(PhysicalField(small_grid, np.zeros(small_grid.shape)))
        assert data[:4] == b"RPF1"
        assert len(data) == 16 + 8 * small_grid.size

    def test_bad_magic(self, small_grid):
        """Foreign bytes are rejected."""
        data = bytearray(snapshot_bytes(PhysicalField(small_grid, np.zeros(small_grid.shape))))
        data[:4] = b"XXXX"
        with pytest.raises(ValueError):
            field_from_snapshot(bytes(data))

    def test_truncated_body(self, small_grid):
        """A body shorter than the header promises is rejected."""
        data = snapshot_bytes(PhysicalField(small_grid, np.zeros(small_grid.shape)))
        with pytest.raises(ValueError):
            field_from_snapshot(data[:-8])

    def test_as_physical_passthrough(self, trig_field):
        """as_physical returns a physical field unchanged."""
        assert as_physical(trig_field) is trig_field

#!/usr/bin/env python3
"""
Tests for roughpde.noise

Covers:
- Admissibility of spectra
- Seed streams
- Sample statistics and Hermitian symmetry
- Mollifiers
"""

import numpy as np
import pytest

from roughpde.grid import GridSpec, as_physical, check_hermitian
from roughpde.noise import (
    CovarianceSpec,
    SeedSpec,
    SpecError,
    a2_holds,
    admissible,
    covariance_at,
    mollifier_hat,
    mollify_noise,
    sample_noise,
    spectrum_table,
    stream_rng,
)


# ============================================================================
# Spectra
# ============================================================================

class TestAdmissibility:
    """Test the spectrum/regularity triple."""

    def test_boundary_case_admissible(self, rough_spec):
        """lambda1 + lambda2 equal to -1 + 2 alpha is admissible."""
        valid, error = admissible(rough_spec)
        assert valid is True
        assert error is None

    def test_too_rough(self):
        """A spectrum rougher than alpha allows is rejected with SpecError."""
        with pytest.raises(SpecError, match="inadmissible"):
            CovarianceSpec(form="product", lambda1=0.0, lambda2=0.0, alpha=0.7)

    def test_alpha_range(self):
        """alpha outside (0,1) is rejected."""
        with pytest.raises(SpecError):
            CovarianceSpec(form="product", lambda1=2.0, alpha=1.0)

    def test_unknown_form(self):
        """Only the product and spatial_only forms exist."""
        with pytest.raises(SpecError, match="unknown covariance form"):
            CovarianceSpec(form="radial", lambda1=2.0, alpha=0.5)

    def test_a2(self, rough_spec, summable_spec):
        """Summability of the renormalization sum follows lambda1 + lambda2 > 1."""
        assert a2_holds(rough_spec) is False
        assert a2_holds(summable_spec) is True
        assert summable_spec.a2 is True

    def test_from_dict_defaults(self):
        """from_dict fills form and lambda2."""
        spec = CovarianceSpec.from_dict({"lambda1": 1.0, "alpha": 0.6})
        assert spec.form == "product"
        assert spec.lambda2 == 0.0

    def test_zero_mode_removed(self, rough_spec, grid):
        """C^(0) = 0, other entries follow the product law."""
        table = spectrum_table(rough_spec, grid)
        assert table[0, 0] == 0.0
        assert table[grid.index_of(3, 0)] == pytest.approx((1 + 6 * np.pi) ** -0.4)

    def test_spatial_only_support(self):
        """spatial_only puts all mass on k2 = 0."""
        spec = CovarianceSpec(form="spatial_only", lambda1=1.0, alpha=0.5)
        assert covariance_at(spec, 2 * np.pi, 2 * np.pi) == 0.0
        assert covariance_at(spec, 2 * np.pi, 0.0) > 0.0


# ============================================================================
# Seed streams
# ============================================================================

class TestSeedStreams:
    """Test counter-based streams."""

    def test_same_label_same_draws(self, seed):
        """A stream is a function of its label."""
        a = stream_rng(seed, 3, "noise").standard_normal(5)
        b = stream_rng(seed, 3, "noise").standard_normal(5)
        assert np.array_equal(a, b)

    def test_labels_differ(self, seed):
        """Different sample indices and purposes give different streams."""
        base = stream_rng(seed, 0, "noise").standard_normal(5)
        assert not np.array_equal(base, stream_rng(seed, 1, "noise").standard_normal(5))
        assert not np.array_equal(base, stream_rng(seed, 0, "noise-pair").standard_normal(5))

    def test_negative_index(self, seed):
        """Sample indices are non-negative."""
        with pytest.raises(ValueError):
            stream_rng(seed, -1)

    def test_seed_range(self):
        """Master seeds are 64-bit unsigned."""
        with pytest.raises(ValueError):
            SeedSpec(-1)


# ============================================================================
# Samples
# ============================================================================

class TestSampling:
    """Test noise samples."""

    def test_sample_is_hermitian_and_mean_zero(self, rough_spec, grid, seed):
        """Samples are real fields with zero mean."""
        f = sample_noise(rough_spec, grid, seed)
        hermitian, _ = check_hermitian(f)
        assert hermitian is True
        assert f.coeffs[0, 0] == 0.0
        assert abs(as_physical(f).values.mean()) < 1e-12

    def test_sample_reproducible(self, rough_spec, grid, seed):
        """Same (seed, index, purpose) gives the same field."""
        a = sample_noise(rough_spec, grid, seed, 4)
        b = sample_noise(rough_spec, grid, seed, 4)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_variance_matches_spectrum(self, summable_spec):
        """Pointwise variance averages to the sum of the spectrum."""
        grid = GridSpec(16, 16)
        seed = SeedSpec(7)
        expected = spectrum_table(summable_spec, grid).sum()
        variances = [as_physical(sample_noise(summable_spec, grid, seed, i)).values.var() for i in range(200)]
        assert np.mean(variances) == pytest.approx(expected, rel=0.1)


# ============================================================================
# Mollifiers
# ============================================================================

class TestMollifiers:
    """Test f -> f_eps."""

    def test_eps_zero_is_identity(self, rough_spec, grid, seed):
        """eps = 0 returns the field itself."""
        f = sample_noise(rough_spec, grid, seed)
        assert mollify_noise(f, 0.0) is f

    def test_symbol_value(self):
        """The default symbol is exp(-eps (k1^4 + k2^2))."""
        assert mollifier_hat(0.5, 1.0, 2.0) == pytest.approx(np.exp(-0.5 * 5.0))

    def test_negative_eps(self):
        """Negative eps is rejected."""
        with pytest.raises(ValueError):
            mollifier_hat(-1.0, 0.0, 0.0)

    def test_mollified_is_smaller(self, rough_spec, grid, seed):
        """Mollification damps every mode."""
        f = sample_noise(rough_spec, grid, seed)
        f_eps = mollify_noise(f, 2.0 ** -10)
        assert np.all(np.abs(f_eps.coeffs) <= np.abs(f.coeffs) + 1e-15)

    def test_unknown_mollifier(self, rough_spec, grid, seed):
        """Only the semigroup and gaussian mollifiers exist."""
        with pytest.raises(ValueError, match="unknown mollifier"):
            mollify_noise(sample_noise(rough_spec, grid, seed), 0.1, kind="box")

"""
Stationary periodic Gaussian forcing f with a prescribed spectrum, the
counter-based seed streams it is drawn from, and the mollifier f -> f_eps.

A sample is f^(k) = sqrt(C^(k)) Z_k with Z_k complex standard normal,
Z_{-k} = conj(Z_k), and <|Z_k|^2> = 1 on every lattice mode (self-conjugate
modes are real with variance 1).
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from typing import Any, Dict, Tuple

import numpy as np

from .grid import GridSpec, SpectralField, apply_multiplier, reflect

FORMS = ("product", "spatial_only")
MOLLIFIERS = ("semigroup", "gaussian")

# Slack on the non-strict admissibility inequality
ADMISSIBLE_SLACK = 1e-12


class SpecError(ValueError):
    """Inadmissible or malformed covariance spec."""


@dataclass(frozen=True)
class CovarianceSpec:
    """Noise spectrum C^(k) and the target regularity alpha."""

    form: str
    lambda1: float
    alpha: float
    lambda2: float = 0.0

    def __post_init__(self):
        valid, error = admissible(self)
        if not valid:
            raise SpecError(error)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CovarianceSpec":
        return cls(
            form=data.get("form", "product"),
            lambda1=float(data["lambda1"]),
            alpha=float(data["alpha"]),
            lambda2=float(data.get("lambda2", 0.0)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def a2(self) -> bool:
        return a2_holds(self)


def admissible(spec: CovarianceSpec) -> Tuple[bool, str | None]:
    """
    Check the spectrum/regularity triple.

    product:      lambda1 + lambda2 >= -1 + 2 alpha, lambda1 > -3 + 2 alpha, lambda2 > -2 + 2 alpha
    spatial_only: lambda1 > -3 + 2 alpha

    Returns:
        tuple: (bool, str) - (is_valid, error_message)
    """
    if spec.form not in FORMS:
        return False, f"unknown covariance form '{spec.form}' (expected one of {', '.join(FORMS)})"
    if not 0.0 < spec.alpha < 1.0:
        return False, f"alpha must lie in (0,1), got {spec.alpha}"
    for name in ("lambda1", "lambda2"):
        if not np.isfinite(getattr(spec, name)):
            return False, f"{name} must be finite"
    l1, l2, alpha = spec.lambda1, spec.lambda2, spec.alpha
    if not l1 > -3.0 + 2.0 * alpha:
        return False, f"inadmissible spectrum: lambda1={l1} must exceed {-3.0 + 2.0 * alpha:g}"
    if spec.form == "spatial_only":
        return True, None
    if l1 + l2 < -1.0 + 2.0 * alpha - ADMISSIBLE_SLACK:
        return False, f"inadmissible spectrum: lambda1+lambda2={l1 + l2} must be at least {-1.0 + 2.0 * alpha:g}"
    if not l2 > -2.0 + 2.0 * alpha:
        return False, f"inadmissible spectrum: lambda2={l2} must exceed {-2.0 + 2.0 * alpha:g}"
    return True, None


def a2_holds(spec: CovarianceSpec) -> bool:
    """Summability of k1^2/(k1^4+k2^2) C^(k); renormalization is then optional."""
    if spec.form == "spatial_only":
        return spec.lambda1 > -1.0
    return spec.lambda1 + spec.lambda2 > 1.0 and spec.lambda1 > -1.0 and spec.lambda2 > -2.0


def covariance_at(spec: CovarianceSpec, k1, k2):
    """C^(k) at wavenumbers (k1, k2); scalars or broadcastable arrays."""
    k1 = np.asarray(k1, dtype=np.float64)
    k2 = np.asarray(k2, dtype=np.float64)
    value = (1.0 + np.abs(k1)) ** (-spec.lambda1)
    if spec.form == "product":
        value = value * (1.0 + np.abs(k2)) ** (-spec.lambda2 / 2.0)
    else:
        value = np.where(k2 == 0.0, value, 0.0)
    value = np.where((k1 == 0.0) & (k2 == 0.0), 0.0, value)
    return float(value) if value.ndim == 0 else value


def spectrum_table(spec: CovarianceSpec, grid: GridSpec) -> np.ndarray:
    """C^ on the lattice of `grid`, FFT order."""
    return covariance_at(spec, grid.k1, grid.k2)


@dataclass(frozen=True)
class SeedSpec:
    """Master seed; streams are addressed by (purpose, sample index)."""

    master_seed: int

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError(f"master seed must be a 64-bit unsigned integer, got {self.master_seed}")

    def rng(self, sample_index: int, purpose: str = "noise") -> np.random.Generator:
        return stream_rng(self, sample_index, purpose)


def purpose_code(purpose: str) -> int:
    """Stable 32-bit code for a purpose tag."""
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], byteorder="big")


def stream_rng(seed: SeedSpec, sample_index: int, purpose: str = "noise") -> np.random.Generator:
    """
    Counter-based Philox stream for one (seed, purpose, sample) label.

    The stream depends only on its label, so draws do not change with the
    order in which samples are produced or the number of worker threads.
    """
    if sample_index < 0:
        raise ValueError("sample index must be non-negative")
    sequence = np.random.SeedSequence(
        entropy=int(seed.master_seed),
        spawn_key=(purpose_code(purpose), int(sample_index)),
    )
    return np.random.Generator(np.random.Philox(sequence))


def hermitian_normals(grid: GridSpec, rng: np.random.Generator) -> np.ndarray:
    """Z with Z(-k) = conj Z(k), <|Z|^2> = 1, real on self-conjugate modes."""
    x = rng.standard_normal(grid.shape)
    y = rng.standard_normal(grid.shape)
    w = (x + 1j * y) / np.sqrt(2.0)
    return (w + np.conj(reflect(w))) / np.sqrt(2.0)


def sample_noise(
    spec: CovarianceSpec,
    grid: GridSpec,
    seed: SeedSpec,
    sample_index: int = 0,
    purpose: str = "noise",
) -> SpectralField:
    """
    Draw one sample of f on `grid`.

    Args:
        spec: covariance spectrum
        grid: target grid
        seed: master seed
        sample_index: stream counter within the purpose
        purpose: stream tag, e.g. "noise" or "noise-pair"

    Returns:
        SpectralField: Hermitian coefficients with f^(0) = 0
    """
    z = hermitian_normals(grid, stream_rng(seed, sample_index, purpose))
    return SpectralField(grid, np.sqrt(spectrum_table(spec, grid)) * z)


def mollifier_hat(eps: float, k1, k2):
    """Default mollifier symbol exp(-eps (k1^4 + k2^2))."""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    k1 = np.asarray(k1, dtype=np.float64)
    k2 = np.asarray(k2, dtype=np.float64)
    value = np.exp(-eps * (k1 ** 4 + k2 ** 2))
    return float(value) if value.ndim == 0 else value


def alt_mollifier_hat(eps: float, k1, k2):
    """Gaussian-product mollifier with parabolic scaling, exp(-(eps^(1/2) k1^2 + eps k2^2))."""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    k1 = np.asarray(k1, dtype=np.float64)
    k2 = np.asarray(k2, dtype=np.float64)
    value = np.exp(-(np.sqrt(eps) * k1 ** 2 + eps * k2 ** 2))
    return float(value) if value.ndim == 0 else value


def mollifier_symbol(grid: GridSpec, eps: float, kind: str = "semigroup") -> np.ndarray:
    """Mollifier symbol of the given kind on the lattice of `grid`."""
    if kind == "semigroup":
        return mollifier_hat(eps, grid.k1, grid.k2)
    if kind == "gaussian":
        return alt_mollifier_hat(eps, grid.k1, grid.k2)
    raise ValueError(f"unknown mollifier '{kind}' (expected one of {', '.join(MOLLIFIERS)})")


def mollify_noise(f: SpectralField, eps: float, kind: str = "semigroup") -> SpectralField:
    """f_eps = f * psi'_eps; eps = 0 returns f."""
    if eps == 0:
        return f
    return apply_multiplier(f, mollifier_symbol(f.grid, eps, kind))

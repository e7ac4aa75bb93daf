"""
Periodic space-time grid on [0,1)^2, the Fourier-series transform pair and
the diagonal operators built on it.

Axis 0 is the space-like variable x1, axis 1 the time-like variable x2.
Coefficients are kept in numpy FFT order and normalized as Fourier-series
coefficients, u(x) = sum_k coeffs(k) exp(i k.x) with k in (2 pi Z)^2.

Symbols odd in a wavenumber (first derivatives, the imaginary part of the
heat symbol) vanish on that wavenumber's Nyquist line; even symbols use the
negative Nyquist frequency. This keeps every multiplier Hermitian.

Environment Variables:
- ROUGHPDE_DEBUG_HERMITIAN: Check Hermitian symmetry after every multiplier (default: 0)
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Tuple, Union

import numpy as np

DEBUG_HERMITIAN = os.getenv("ROUGHPDE_DEBUG_HERMITIAN", "0") == "1"
HERMITIAN_RTOL = 1e-12
MIN_GRID_SIZE = 8

SNAPSHOT_MAGIC = b"RPF1"
SNAPSHOT_HEADER = struct.Struct("<4sIII")
KIND_PHYSICAL = 0
KIND_SPECTRAL = 1


class GridError(ValueError):
    """Invalid grid sizes or mismatched grids."""


def validate_sizes(n1, n2) -> Tuple[bool, str | None]:
    """
    Validate grid sizes.

    Returns:
        tuple: (bool, str) - (is_valid, error_message)
    """
    for n in (n1, n2):
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            return False, f"grid sizes must be integers, got {n!r}"
    if n1 % 2 or n2 % 2:
        return False, "grid sizes must be even"
    if n1 < MIN_GRID_SIZE or n2 < MIN_GRID_SIZE:
        return False, f"grid sizes must be at least {MIN_GRID_SIZE}"
    return True, None


@dataclass(frozen=True)
class GridSpec:
    """Uniform n1 x n2 grid on the unit torus with its frequency lattice."""

    n1: int
    n2: int

    def __post_init__(self):
        valid, error = validate_sizes(self.n1, self.n2)
        if not valid:
            raise GridError(error)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def h1(self) -> float:
        return 1.0 / self.n1

    @property
    def h2(self) -> float:
        return 1.0 / self.n2

    # 1-d lattice vectors in FFT order: j in {0..n/2-1, -n/2..-1}
    @cached_property
    def j1_vec(self) -> np.ndarray:
        return np.fft.fftfreq(self.n1, d=1.0 / self.n1)

    @cached_property
    def j2_vec(self) -> np.ndarray:
        return np.fft.fftfreq(self.n2, d=1.0 / self.n2)

    @cached_property
    def k1_vec(self) -> np.ndarray:
        return 2.0 * np.pi * self.j1_vec

    @cached_property
    def k2_vec(self) -> np.ndarray:
        return 2.0 * np.pi * self.j2_vec

    @cached_property
    def k1_odd_vec(self) -> np.ndarray:
        return _drop_nyquist(self.k1_vec)

    @cached_property
    def k2_odd_vec(self) -> np.ndarray:
        return _drop_nyquist(self.k2_vec)

    @cached_property
    def k1(self) -> np.ndarray:
        return np.broadcast_to(self.k1_vec[:, None], self.shape)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(self.k2_vec[None, :], self.shape)

    @cached_property
    def k1_odd(self) -> np.ndarray:
        return np.broadcast_to(self.k1_odd_vec[:, None], self.shape)

    @cached_property
    def k2_odd(self) -> np.ndarray:
        return np.broadcast_to(self.k2_odd_vec[None, :], self.shape)

    def index_of(self, j1: int, j2: int) -> Tuple[int, int]:
        """Storage index of the lattice point 2 pi (j1, j2)."""
        if not (-self.n1 // 2 <= j1 < self.n1 // 2 and -self.n2 // 2 <= j2 < self.n2 // 2):
            raise GridError(f"frequency index ({j1}, {j2}) is outside the lattice")
        return (j1 % self.n1, j2 % self.n2)


def _drop_nyquist(k: np.ndarray) -> np.ndarray:
    out = k.copy()
    out[len(k) // 2] = 0.0
    return out


def make_grid(n1: int, n2: int) -> GridSpec:
    """
    Build a grid spec.

    Args:
        n1: grid points in x1 (even, >= 8)
        n2: grid points in x2 (even, >= 8)

    Returns:
        GridSpec: the grid with its frequency lattice
    """
    return GridSpec(n1, n2)


def grid_points(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Physical coordinates (x1, x2) of every grid point, shape (n1, n2) each."""
    x1 = np.arange(grid.n1) * grid.h1
    x2 = np.arange(grid.n2) * grid.h2
    return np.meshgrid(x1, x2, indexing="ij")


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PhysicalField:
    """Real grid function; values[i1, i2] is the value at (i1 h1, i2 h2)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise GridError(f"field shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("physical field has non-finite entries")
        object.__setattr__(self, "values", _readonly(values))

    def __add__(self, other: "PhysicalField") -> "PhysicalField":
        require_same_grid(self, other)
        return PhysicalField(self.grid, self.values + other.values)

    def __sub__(self, other: "PhysicalField") -> "PhysicalField":
        require_same_grid(self, other)
        return PhysicalField(self.grid, self.values - other.values)

    def scaled(self, factor: float) -> "PhysicalField":
        return PhysicalField(self.grid, factor * self.values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier-series coefficients on the lattice of `grid`, FFT order."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != self.grid.shape:
            raise GridError(f"coefficient shape {coeffs.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", _readonly(coeffs))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        require_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def scaled(self, factor: float) -> "SpectralField":
        return SpectralField(self.grid, factor * self.coeffs)

    def mode(self, j1: int, j2: int) -> complex:
        """Coefficient of the lattice point 2 pi (j1, j2)."""
        return complex(self.coeffs[self.grid.index_of(j1, j2)])


Field = Union[PhysicalField, SpectralField]


def require_same_grid(a: Field, b: Field) -> None:
    """Raise GridError unless both fields live on the same grid."""
    if a.grid != b.grid:
        raise GridError(f"grid mismatch: {a.grid.shape} vs {b.grid.shape}")


def zeros(grid: GridSpec) -> PhysicalField:
    return PhysicalField(grid, np.zeros(grid.shape))


def reflect(arr: np.ndarray) -> np.ndarray:
    """Return arr evaluated at -k (lattice partner index), FFT order."""
    return np.roll(np.flip(arr, axis=(0, 1)), shift=(1, 1), axis=(0, 1))


def _self_conjugate_slices(grid: GridSpec):
    return np.ix_([0, grid.n1 // 2], [0, grid.n2 // 2])


def forward(field: PhysicalField) -> SpectralField:
    """Physical values -> Fourier-series coefficients."""
    if not isinstance(field, PhysicalField):
        raise TypeError("forward expects a PhysicalField")
    grid = field.grid
    coeffs = np.fft.fft2(field.values) / grid.size
    idx = _self_conjugate_slices(grid)
    coeffs[idx] = coeffs[idx].real
    return SpectralField(grid, coeffs)


def inverse(field: SpectralField) -> PhysicalField:
    """Fourier-series coefficients -> real physical values."""
    if not isinstance(field, SpectralField):
        raise TypeError("inverse expects a SpectralField")
    values = np.fft.ifft2(field.coeffs) * field.grid.size
    if DEBUG_HERMITIAN:
        scale = max(np.abs(values).max(), 1e-300)
        if np.abs(values.imag).max() > HERMITIAN_RTOL * scale:
            raise ValueError("inverse transform of a non-Hermitian field is not real")
    return PhysicalField(field.grid, values.real)


def as_spectral(field: Field) -> SpectralField:
    return field if isinstance(field, SpectralField) else forward(field)


def as_physical(field: Field) -> PhysicalField:
    return field if isinstance(field, PhysicalField) else inverse(field)


def check_hermitian(field: SpectralField) -> Tuple[bool, float]:
    """
    Check coeffs(-k) == conj(coeffs(k)).

    Returns:
        tuple: (bool, float) - (is_hermitian, relative deviation)
    """
    coeffs = field.coeffs
    scale = np.abs(coeffs).max()
    if scale == 0.0:
        return True, 0.0
    deviation = np.abs(reflect(coeffs) - np.conj(coeffs)).max() / scale
    return bool(deviation <= HERMITIAN_RTOL), float(deviation)


def apply_multiplier(field: Field, multiplier: np.ndarray) -> Field:
    """Multiply every mode by `multiplier`; returns the same kind of field it got."""
    spectral = as_spectral(field)
    result = SpectralField(spectral.grid, spectral.coeffs * multiplier)
    if DEBUG_HERMITIAN:
        ok, deviation = check_hermitian(result)
        if not ok:
            raise ValueError(f"multiplier broke Hermitian symmetry (deviation {deviation:.2e})")
    if isinstance(field, PhysicalField):
        return inverse(result)
    return result


def project_mean_zero(field: Field) -> Field:
    """The projection P on mean-zero functions."""
    if isinstance(field, PhysicalField):
        spectral = forward(field)
        coeffs = spectral.coeffs.copy()
        coeffs[0, 0] = 0.0
        return inverse(SpectralField(field.grid, coeffs))
    coeffs = field.coeffs.copy()
    coeffs[0, 0] = 0.0
    return SpectralField(field.grid, coeffs)


def d1(field: Field) -> Field:
    return apply_multiplier(field, 1j * field.grid.k1_odd)


def d2(field: Field) -> Field:
    return apply_multiplier(field, 1j * field.grid.k2_odd)


def d1_squared(field: Field) -> Field:
    return apply_multiplier(field, -field.grid.k1 ** 2)


def dealias(field: Field) -> Field:
    """2/3-rule: zero every mode with |j1| > n1/3 or |j2| > n2/3."""
    grid = field.grid
    keep = (np.abs(grid.j1_vec)[:, None] <= grid.n1 / 3.0) & (np.abs(grid.j2_vec)[None, :] <= grid.n2 / 3.0)
    return apply_multiplier(field, keep.astype(np.float64))


def snapshot_bytes(field: Field) -> bytes:
    """Encode a field in the RPF1 snapshot format."""
    grid = field.grid
    if isinstance(field, PhysicalField):
        header = SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, grid.n1, grid.n2, KIND_PHYSICAL)
        body = np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")
    else:
        header = SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, grid.n1, grid.n2, KIND_SPECTRAL)
        interleaved = np.stack((field.coeffs.real, field.coeffs.imag), axis=-1)
        body = np.ascontiguousarray(interleaved, dtype="<f8").tobytes(order="C")
    return header + body


def field_from_snapshot(data: bytes) -> Field:
    """Decode an RPF1 snapshot."""
    if len(data) < SNAPSHOT_HEADER.size:
        raise ValueError("snapshot is truncated")
    magic, n1, n2, kind = SNAPSHOT_HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"not an RPF1 snapshot (magic {magic!r})")
    grid = GridSpec(int(n1), int(n2))
    body = np.frombuffer(data, dtype="<f8", offset=SNAPSHOT_HEADER.size)
    if kind == KIND_PHYSICAL:
        if body.size != grid.size:
            raise ValueError("snapshot body does not match its header")
        return PhysicalField(grid, body.reshape(grid.shape))
    if kind == KIND_SPECTRAL:
        if body.size != 2 * grid.size:
            raise ValueError("snapshot body does not match its header")
        pairs = body.reshape(grid.n1, grid.n2, 2)
        return SpectralField(grid, pairs[..., 0] + 1j * pairs[..., 1])
    raise ValueError(f"unknown snapshot kind {kind}")


def save_snapshot(field: Field, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(snapshot_bytes(field))
    return path


def load_snapshot(path: Union[str, Path]) -> Field:
    return field_from_snapshot(Path(path).read_bytes())

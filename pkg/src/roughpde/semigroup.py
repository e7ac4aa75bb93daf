"""
The mollification family f -> f_T, convolution with the kernel psi_T whose
symbol is exp(-T (k1^4 + k2^2)), and the diagnostics built on it.

psi_T factorizes as phi1(x1) phi2(x2) with phi1 the kernel of exp(-T k1^4)
and phi2 the Gaussian kernel of exp(-T k2^2); the physical-space helpers
below use that to stay one-dimensional where they can.
"""

from __future__ import annotations

import math
from typing import List, Optional, Tuple

import numpy as np

from .grid import Field, GridSpec, PhysicalField, SpectralField, apply_multiplier, as_physical
from .logs import log

# Kernel half-widths in units of the x1-scale T^(1/4) and the x2-scale T^(1/2)
X1_HALF_WIDTH = 35.0
X2_HALF_WIDTH = 10.0
MAX_MOMENT_ORDER = 4


def t_min(grid: GridSpec) -> float:
    """Smallest scale the grid resolves."""
    return 16.0 * max(grid.h1 ** 4, grid.h2 ** 2)


def resolvable(grid: GridSpec, T: float) -> bool:
    return t_min(grid) < T <= 1.0


def dyadic_scales(grid: GridSpec, j_max: Optional[int] = None) -> List[float]:
    """
    Dyadic T = 2^-j, j = 0..j_max, with 2^-j_max >= t_min(grid).

    Args:
        grid: grid the scales must be resolvable on
        j_max: cap on j (default: as far as the grid resolves)

    Returns:
        list: scales in decreasing order, starting at T = 1
    """
    floor = t_min(grid)
    limit = int(math.floor(-math.log2(floor))) if floor < 1.0 else 0
    if j_max is not None:
        limit = min(limit, j_max)
    return [2.0 ** -j for j in range(0, limit + 1) if 2.0 ** -j >= floor]


def semigroup_symbol(grid: GridSpec, T: float) -> np.ndarray:
    return np.exp(-T * (grid.k1 ** 4 + grid.k2 ** 2))


def mollify(f: Field, T: float) -> Field:
    """f_T; T = 0 is the identity. Unresolvable T is computed anyway with a warning."""
    if T < 0:
        raise ValueError(f"mollifier scale must be non-negative, got {T}")
    if T == 0:
        return f
    if not resolvable(f.grid, T):
        log(f"mollifier scale T={T:g} outside resolvable range ({t_min(f.grid):g}, 1]", "WARNING")
    return apply_multiplier(f, semigroup_symbol(f.grid, T))


def semigroup_residual(f: Field, t: float, T: float) -> float:
    """max |(f_T)_t - f_(T+t)| relative to max |f_(T+t)|, in physical space."""
    lhs = as_physical(mollify(mollify(as_physical(f), T), t)).values
    rhs = as_physical(mollify(as_physical(f), T + t)).values
    scale = np.abs(rhs).max()
    diff = np.abs(lhs - rhs).max()
    return float(diff / scale) if scale > 0 else float(diff)


def x1_commutator_symbol(grid: GridSpec, T: float) -> np.ndarray:
    """Fourier transform of x1 psi_T: -4 i T k1^3 psi^_T (odd in k1)."""
    return -4j * T * grid.k1_odd ** 3 * semigroup_symbol(grid, T)


def x1_commutator(f: Field, T: float) -> Field:
    """[x1, (.)_T] f = x1 f_T - (x1 f)_T, i.e. convolution with x1 psi_T."""
    if T <= 0:
        raise ValueError(f"mollifier scale must be positive, got {T}")
    return apply_multiplier(f, x1_commutator_symbol(grid=f.grid, T=T))


def _line_kernel(symbol, length: float, points: int, order: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample d^order/dz^order of the kernel with 1-d symbol `symbol(xi)` on a
    centered box of the given length, by a Riemann sum of the inverse
    Fourier integral. Returns (z, values) in FFT order.
    """
    spacing = length / points
    xi = 2.0 * np.pi * np.fft.fftfreq(points, d=spacing)
    z = np.fft.fftfreq(points, d=1.0 / points) * spacing
    values = np.fft.ifft((1j * xi) ** order * symbol(xi)).real * (points / length)
    return z, values


def _periodized_line(symbol, n: int, periods: int, weight_z: bool) -> np.ndarray:
    """Kernel (optionally times z) sampled at j/n and folded onto one period."""
    z, values = _line_kernel(symbol, float(periods), periods * n)
    if weight_z:
        values = z * values
    return values.reshape(periods, n).sum(axis=0)


def x1_commutator_physical(f: Field, T: float) -> PhysicalField:
    """
    Physical-space oracle for x1_commutator: the periodized kernel x1 psi_T
    sampled on the grid and convolved with f by direct summation.

    Meant for small grids; cost is O((n1 n2)^2).
    """
    if T <= 0:
        raise ValueError(f"mollifier scale must be positive, got {T}")
    grid = f.grid
    periods1 = 2 * int(math.ceil(X1_HALF_WIDTH * T ** 0.25)) + 2
    periods2 = 2 * int(math.ceil(X2_HALF_WIDTH * T ** 0.5)) + 2
    p1 = _periodized_line(lambda xi: np.exp(-T * xi ** 4), grid.n1, periods1, weight_z=True)
    p2 = _periodized_line(lambda xi: np.exp(-T * xi ** 2), grid.n2, periods2, weight_z=False)
    kernel = np.outer(p1, p2) * grid.h1 * grid.h2

    values = as_physical(f).values
    out = np.zeros(grid.shape)
    for i1 in range(grid.n1):
        for i2 in range(grid.n2):
            weight = kernel[i1, i2]
            if weight != 0.0:
                out += weight * np.roll(values, shift=(i1, i2), axis=(0, 1))
    return PhysicalField(grid, out)


def kernel_moment(derivative: Tuple[int, int], moment_alpha: float, T: float, refine: int = 4) -> float:
    """
    Integral over R^2 of |d^order psi_T / dx_axis^order| times d(0,x)^moment_alpha.

    Args:
        derivative: (axis, order), axis in {1, 2}, order in 0..4
        moment_alpha: exponent of the parabolic distance, >= 0
        T: mollifier scale
        refine: quadrature refinement factor of the auxiliary box

    Returns:
        float: the moment, comparable against (T^(1/4))^(-order+alpha) (axis 1)
        or (T^(1/4))^(-2 order+alpha) (axis 2)
    """
    axis, order = derivative
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    if not 0 <= order <= MAX_MOMENT_ORDER:
        raise ValueError(f"derivative order must lie in 0..{MAX_MOMENT_ORDER}, got {order}")
    if moment_alpha < 0:
        raise ValueError("moment exponent must be non-negative")
    if T <= 0:
        raise ValueError(f"mollifier scale must be positive, got {T}")

    s1, s2 = T ** 0.25, T ** 0.5
    n1, n2 = refine * 512, refine * 64
    len1, len2 = 2.0 * X1_HALF_WIDTH * s1, 2.0 * X2_HALF_WIDTH * s2
    z1, phi1 = _line_kernel(lambda xi: np.exp(-T * xi ** 4), len1, n1, order if axis == 1 else 0)
    z2, phi2 = _line_kernel(lambda xi: np.exp(-T * xi ** 2), len2, n2, order if axis == 2 else 0)

    density = np.abs(np.outer(phi1, phi2))
    if moment_alpha > 0:
        distance = np.abs(z1)[:, None] + np.sqrt(np.abs(z2))[None, :]
        density = density * distance ** moment_alpha
    return float(density.sum() * (len1 / n1) * (len2 / n2))

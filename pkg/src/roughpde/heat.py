"""
Constant-coefficient periodic solves (d2 - a0 d1^2) v = P f, the model
family v(., a0) on Chebyshev nodes in a0, and the evaluation operator E
that turns a node family g(x, a0) into g(x, a(x)).

The Green symbol is 1/(a0 k1^2 + i k2), the inverse of the symbol of
d2 - a0 d1^2 under u(x) = sum_k u^(k) exp(i k.x). a0-derivatives use the
exact multipliers d^n G/da0^n = (-1)^n n! k1^(2n) G^(n+1), never finite
differences of the interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.polynomial import chebyshev
from scipy.interpolate import BarycentricInterpolator

from .grid import Field, GridSpec, PhysicalField, SpectralField, apply_multiplier, as_spectral, project_mean_zero

COMPONENTS = ("v", "dv", "d2v", "d1sq_v")
DEFAULT_NODES = 9
MAX_LISTED_POINTS = 5
RANGES = ("stochastic", "deterministic")


class EllipticityError(ValueError):
    """Coefficient outside the ellipticity box."""


@dataclass(frozen=True)
class EllipticityBox:
    """Admissible a0 range: [lambda, 1] (stochastic) or [lambda, 1/lambda] (deterministic)."""

    lambda_: float
    kind: str = "stochastic"

    def __post_init__(self):
        if not 0.0 < self.lambda_ <= 1.0:
            raise ValueError(f"lambda must lie in (0,1], got {self.lambda_}")
        if self.kind not in RANGES:
            raise ValueError(f"unknown a0 range '{self.kind}' (expected one of {', '.join(RANGES)})")

    @property
    def lower(self) -> float:
        return self.lambda_

    @property
    def upper(self) -> float:
        return 1.0 if self.kind == "stochastic" else 1.0 / self.lambda_

    def contains(self, a0) -> np.ndarray:
        a0 = np.asarray(a0, dtype=np.float64)
        # round-off slack at the edges
        slack = 1e-12 * self.upper
        return (a0 >= self.lower - slack) & (a0 <= self.upper + slack)

    def check(self, a0: float) -> float:
        if not bool(self.contains(a0)):
            raise EllipticityError(f"ellipticity violated: a0={a0} outside [{self.lower:g}, {self.upper:g}]")
        return float(a0)


def green_multiplier(k1: float, k2: float, a0: float) -> complex:
    """G^(k, a0) at a single wavenumber; 0 at k = 0."""
    if a0 <= 0:
        raise ValueError(f"a0 must be positive, got {a0}")
    denominator = a0 * k1 ** 2 + 1j * k2
    if denominator == 0:
        return 0j
    return 1.0 / denominator


def green_symbol(grid: GridSpec, a0: float) -> np.ndarray:
    """G^(., a0) on the lattice; zero where the heat symbol vanishes."""
    if a0 <= 0:
        raise ValueError(f"a0 must be positive, got {a0}")
    denominator = a0 * grid.k1 ** 2 + 1j * grid.k2_odd
    out = np.zeros(grid.shape, dtype=np.complex128)
    nonzero = denominator != 0
    out[nonzero] = 1.0 / denominator[nonzero]
    return out


def derivative_symbol(grid: GridSpec, a0: float, n: int) -> np.ndarray:
    """d^n G / da0^n = (-1)^n n! k1^(2n) G^(n+1)."""
    if n < 0:
        raise ValueError(f"derivative order must be non-negative, got {n}")
    green = green_symbol(grid, a0)
    return (-1) ** n * math.factorial(n) * grid.k1 ** (2 * n) * green ** (n + 1)


def heat_symbol(grid: GridSpec, a0: float) -> np.ndarray:
    """Symbol of d2 - a0 d1^2."""
    return 1j * grid.k2_odd + a0 * grid.k1 ** 2


def range_mask(grid: GridSpec) -> np.ndarray:
    """Modes where d2 - a0 d1^2 is invertible: all but k = 0 and (0, -n2/2)."""
    return (grid.k1 != 0) | (grid.k2_odd != 0)


def project_range(f: Field) -> Field:
    """P followed by removal of the other kernel mode (0, -n2/2)."""
    return apply_multiplier(f, range_mask(f.grid).astype(np.float64))


def solve_heat(f: Field, a0: float) -> SpectralField:
    """Mean-free periodic solution v of (d2 - a0 d1^2) v = P f."""
    return apply_multiplier(project_mean_zero(as_spectral(f)), green_symbol(f.grid, a0))


def solve_on_box(f: Field, a0: float, box: EllipticityBox) -> SpectralField:
    return solve_heat(f, box.check(a0))


def a0_derivative(f: Field, a0: float, n: int) -> SpectralField:
    """Exact d^n v / da0^n of the solution v(., a0)."""
    return apply_multiplier(project_mean_zero(as_spectral(f)), derivative_symbol(f.grid, a0, n))


def heat_residual(v: SpectralField, f: Field, a0: float) -> float:
    """
    Relative l2 residual of (d2 - a0 d1^2) v - P f on the range of the
    discrete operator. The mode (0, -n2/2) is in its kernel (d2 of the x2
    Nyquist wave vanishes on the grid) and is dropped by every solve.
    """
    symbol = heat_symbol(v.grid, a0)
    pf = project_range(as_spectral(f)).coeffs
    lhs = symbol * v.coeffs
    scale = np.linalg.norm(pf)
    diff = np.linalg.norm(lhs - pf)
    return float(diff / scale) if scale > 0 else float(diff)


def symbol_bound_check(grid: GridSpec, a0: float) -> Tuple[float, float]:
    """Range of |G^(k,a0)| (a0 k1^2 + |k2|) over modes where G^ is nonzero."""
    green = green_symbol(grid, a0)
    nonzero = green != 0
    ratio = np.abs(green[nonzero]) * (a0 * grid.k1[nonzero] ** 2 + np.abs(grid.k2_odd[nonzero]))
    return float(ratio.min()), float(ratio.max())


def chebyshev_nodes(box: EllipticityBox, n_nodes: int) -> np.ndarray:
    """First-kind Chebyshev points of [box.lower, box.upper], ascending."""
    if box.lower == box.upper:
        return np.array([box.lower])
    x = chebyshev.chebpts1(n_nodes)
    return box.lower + (box.upper - box.lower) * (x + 1.0) / 2.0


def interpolation_basis(nodes: np.ndarray, points) -> np.ndarray:
    """Barycentric Lagrange basis, shape (len(points), len(nodes))."""
    points = np.atleast_1d(np.asarray(points, dtype=np.float64))
    if len(nodes) == 1:
        return np.ones((points.size, 1))
    return BarycentricInterpolator(nodes, np.eye(len(nodes)))(points)


@dataclass(frozen=True, eq=False)
class NodeStack:
    """Values of a two-variable field g(x, a0) at the a0 nodes, physical, shape (nodes, n1, n2)."""

    grid: GridSpec
    nodes: np.ndarray
    values: np.ndarray
    box: EllipticityBox

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.nodes),) + self.grid.shape:
            raise ValueError(f"node stack shape {values.shape} does not match {len(self.nodes)} nodes on {self.grid.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_fields(cls, nodes, fields, box: EllipticityBox) -> "NodeStack":
        fields = list(fields)
        grid = fields[0].grid
        values = np.stack([np.asarray(f.values) for f in fields])
        return cls(grid, np.asarray(nodes, dtype=np.float64), values, box)


def evaluate_E(stack: NodeStack, a: PhysicalField) -> PhysicalField:
    """
    E: (x, a0) -> g(x, a0) becomes x -> g(x, a(x)), by barycentric
    interpolation in a0 at every grid point.
    """
    if a.grid != stack.grid:
        raise ValueError("coefficient field and node family live on different grids")
    a_values = a.values.ravel()
    inside = stack.box.contains(a_values)
    if not inside.all():
        bad = np.flatnonzero(~inside)
        listed = ", ".join(
            f"({i // stack.grid.n2},{i % stack.grid.n2})={a_values[i]:.4g}" for i in bad[:MAX_LISTED_POINTS]
        )
        more = f" and {bad.size - MAX_LISTED_POINTS} more" if bad.size > MAX_LISTED_POINTS else ""
        raise EllipticityError(
            f"ellipticity violated at {bad.size} points, a outside [{stack.box.lower:g}, {stack.box.upper:g}]: {listed}{more}"
        )
    basis = interpolation_basis(stack.nodes, a_values)
    flat = stack.values.reshape(len(stack.nodes), -1)
    values = np.einsum("pn,np->p", basis, flat)
    return PhysicalField(stack.grid, values.reshape(stack.grid.shape))


@dataclass(frozen=True, eq=False)
class ModelFamily:
    """
    v(., a0), dv/da0, d^2v/da0^2 and d1^2 v(., a0) at Chebyshev nodes of the
    ellipticity box, as spectral coefficient stacks of shape (nodes, n1, n2).
    """

    grid: GridSpec
    box: EllipticityBox
    a0_nodes: np.ndarray
    coeffs: Dict[str, np.ndarray] = field(repr=False)

    @property
    def lambda_(self) -> float:
        return self.box.lambda_

    def node_field(self, component: str, index: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[component][index])

    @cached_property
    def _physical(self) -> Dict[str, np.ndarray]:
        scale = self.grid.size
        return {name: np.fft.ifft2(stack, axes=(1, 2)).real * scale for name, stack in self.coeffs.items()}

    def stack(self, component: str = "v") -> NodeStack:
        if component not in self.coeffs:
            raise KeyError(f"unknown family component '{component}' (expected one of {', '.join(COMPONENTS)})")
        return NodeStack(self.grid, self.a0_nodes, self._physical[component], self.box)

    def evaluate(self, component: str, a: PhysicalField) -> PhysicalField:
        return evaluate_E(self.stack(component), a)


def build_family(f: Field, lambda_: float, n_nodes: int = DEFAULT_NODES, kind: str = "stochastic") -> ModelFamily:
    """
    Solve for the model family at Chebyshev nodes of the ellipticity box.

    Args:
        f: forcing
        lambda_: ellipticity constant in (0,1]
        n_nodes: number of a0 nodes (>= 3)
        kind: "stochastic" for [lambda, 1], "deterministic" for [lambda, 1/lambda]

    Returns:
        ModelFamily: node solves with exact a0-derivatives
    """
    if n_nodes < 3:
        raise ValueError(f"n_nodes must be at least 3, got {n_nodes}")
    box = EllipticityBox(lambda_, kind)
    nodes = chebyshev_nodes(box, n_nodes)
    pf = project_mean_zero(as_spectral(f))
    grid = pf.grid
    coeffs = {name: np.empty((len(nodes),) + grid.shape, dtype=np.complex128) for name in COMPONENTS}
    for i, a0 in enumerate(nodes):
        coeffs["v"][i] = green_symbol(grid, a0) * pf.coeffs
        coeffs["dv"][i] = derivative_symbol(grid, a0, 1) * pf.coeffs
        coeffs["d2v"][i] = derivative_symbol(grid, a0, 2) * pf.coeffs
        coeffs["d1sq_v"][i] = -grid.k1 ** 2 * coeffs["v"][i]
    for stack in coeffs.values():
        stack.setflags(write=False)
    return ModelFamily(grid, box, nodes, coeffs)


def interpolate_family(family: ModelFamily, a0: float, component: Optional[str] = None):
    """
    Barycentric interpolation of the family at a single a0.

    Returns:
        SpectralField for one component, or a dict of all components
    """
    family.box.check(a0)
    weights = interpolation_basis(family.a0_nodes, [a0])[0]
    names = (component,) if component else COMPONENTS
    fields = {
        name: SpectralField(family.grid, np.tensordot(weights, family.coeffs[name], axes=1)) for name in names
    }
    return fields[component] if component else fields


def family_residual(family: ModelFamily, f: Field) -> float:
    """Largest node residual of the defining equation."""
    return max(heat_residual(family.node_field("v", i), f, a0) for i, a0 in enumerate(family.a0_nodes))

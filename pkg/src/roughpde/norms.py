"""
Parabolic metric, Hölder seminorms, the negative norm, the modelledness
constant in its ball form, and log-log scaling fits.

All norms are taken at grid resolution: a sup is the max over grid points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .grid import Field, GridSpec, PhysicalField, as_physical
from .heat import EllipticityError, ModelFamily, interpolation_basis
from .noise import SeedSpec, stream_rng
from .semigroup import mollify

DEFAULT_PAIR_BUDGET = 20_000
DEFAULT_STRIDE = 4
MAX_RADIUS = 0.5
MIN_BALL_POINTS = 3
NU_BALL_POINTS = 25
MIN_FIT_SAMPLES = 4
FIT_METHOD = "least-squares affine fit in x1"


@dataclass(frozen=True)
class HolderParams:
    """Pair sampling and base-point settings; sampling is a function of `seed`."""

    alpha: float
    pair_budget: int = DEFAULT_PAIR_BUDGET
    base_point_stride: int = DEFAULT_STRIDE
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        if self.pair_budget < 0:
            raise ValueError("pair_budget must be non-negative")
        if self.base_point_stride < 1:
            raise ValueError("base_point_stride must be positive")


def _periodic_gap(d):
    d = np.abs(np.asarray(d, dtype=np.float64)) % 1.0
    return np.minimum(d, 1.0 - d)


def parabolic_distance(x, y):
    """|x1 - y1| + sqrt|x2 - y2| on the unit torus."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = _periodic_gap(x[..., 0] - y[..., 0]) + np.sqrt(_periodic_gap(x[..., 1] - y[..., 1]))
    return float(d) if np.ndim(d) == 0 else d


def offset_distance(grid: GridSpec, m1, m2):
    """Parabolic distance of the grid offset (m1, m2) from the origin."""
    return _periodic_gap(np.asarray(m1) * grid.h1) + np.sqrt(_periodic_gap(np.asarray(m2) * grid.h2))


def sup_norm(field: Field) -> float:
    return float(np.abs(as_physical(field).values).max())


def _shift_ratio(values: np.ndarray, grid: GridSpec, m1: int, m2: int, alpha: float) -> float:
    d = offset_distance(grid, m1, m2)
    if d == 0:
        return 0.0
    diff = np.abs(values - np.roll(values, shift=(m1, m2), axis=(0, 1))).max()
    return float(diff / d ** alpha)


def holder_seminorm(u: Field, alpha: float, params: Optional[HolderParams] = None) -> float:
    """
    Sampled [u]_alpha: max of |u(x) - u(y)| / d(x,y)^alpha over all
    nearest-neighbour pairs, the axis-aligned pairs at every dyadic scale,
    and `pair_budget` random pairs per dyadic scale.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    params = params or HolderParams(alpha)
    values = as_physical(u).values
    grid = u.grid

    best = 0.0
    for m1, m2 in ((1, 0), (0, 1), (1, 1), (1, -1)):
        best = max(best, _shift_ratio(values, grid, m1, m2, alpha))

    rng = stream_rng(SeedSpec(params.seed), 0, "holder-pairs")
    flat = values.ravel()
    for s in _dyadic_lengths(grid):
        r1 = min(int(math.ceil(s / grid.h1)), grid.n1 // 2)
        r2 = min(int(math.ceil(s * s / grid.h2)), grid.n2 // 2)
        best = max(best, _shift_ratio(values, grid, r1, 0, alpha), _shift_ratio(values, grid, 0, r2, alpha))
        if params.pair_budget == 0:
            continue
        base = rng.integers(0, grid.size, size=params.pair_budget)
        o1 = rng.integers(-r1, r1 + 1, size=params.pair_budget)
        o2 = rng.integers(-r2, r2 + 1, size=params.pair_budget)
        i1, i2 = np.divmod(base, grid.n2)
        partner = ((i1 + o1) % grid.n1) * grid.n2 + (i2 + o2) % grid.n2
        d = offset_distance(grid, o1, o2)
        keep = d > 0
        if keep.any():
            ratios = np.abs(flat[base[keep]] - flat[partner[keep]]) / d[keep] ** alpha
            best = max(best, float(ratios.max()))
    return best


def _dyadic_lengths(grid: GridSpec) -> List[float]:
    """x1-lengths 2^-j from 1/2 down to the grid spacing."""
    out = []
    s = 0.5
    while s >= min(grid.h1, math.sqrt(grid.h2)):
        out.append(s)
        s /= 2.0
    return out


def holder_seminorm_exhaustive(u: Field, alpha: float) -> float:
    """Max over all pairs of grid points; O((n1 n2)^2), small grids only."""
    values = as_physical(u).values
    grid = u.grid
    best = 0.0
    for m1 in range(grid.n1):
        for m2 in range(grid.n2):
            best = max(best, _shift_ratio(values, grid, m1, m2, alpha))
    return best


def negative_norm(f: Field, alpha: float, T_list: Iterable[float]) -> float:
    """max over T of (T^(1/4))^(2-alpha) ||f_T||."""
    best = 0.0
    for T in T_list:
        best = max(best, (T ** 0.25) ** (2.0 - alpha) * sup_norm(mollify(f, T)))
    return best


# ============================================================================
# Modelledness
# ============================================================================

def _ball_offsets(grid: GridSpec, R: float) -> Tuple[np.ndarray, np.ndarray]:
    """Grid offsets (m1, m2) with |m1 h1| + sqrt|m2 h2| <= R, one per torus point."""
    r1 = min(int(math.floor(R / grid.h1)), grid.n1 // 2)
    r2 = min(int(math.floor(R * R / grid.h2)), grid.n2 // 2)
    m1, m2 = np.meshgrid(np.arange(-r1, r1 + 1), np.arange(-r2, r2 + 1), indexing="ij")
    m1, m2 = m1.ravel(), m2.ravel()
    inside = np.abs(m1) * grid.h1 + np.sqrt(np.abs(m2) * grid.h2) <= R + 1e-12
    m1, m2 = m1[inside], m2[inside]
    _, first = np.unique((m1 % grid.n1) * grid.n2 + m2 % grid.n2, return_index=True)
    first.sort()
    return m1[first], m2[first]


def _radii(grid: GridSpec) -> List[Tuple[float, np.ndarray, np.ndarray]]:
    out = []
    R = MAX_RADIUS
    while True:
        m1, m2 = _ball_offsets(grid, R)
        if m1.size < MIN_BALL_POINTS:
            break
        out.append((R, m1, m2))
        R /= 2.0
    return out


def _base_points(grid: GridSpec, stride: int) -> Tuple[np.ndarray, np.ndarray]:
    b1, b2 = np.meshgrid(np.arange(0, grid.n1, stride), np.arange(0, grid.n2, stride), indexing="ij")
    return b1.ravel(), b2.ravel()


def _affine_fit(y1: np.ndarray, w: np.ndarray) -> Optional[Tuple[float, float, float]]:
    """Least-squares c + nu y1 through (y1, w); returns (sup residual, nu, c) or None if degenerate."""
    mean1 = y1.mean()
    var1 = ((y1 - mean1) ** 2).sum()
    if var1 == 0:
        return None
    mean_w = w.mean()
    nu = float(((y1 - mean1) * (w - mean_w)).sum() / var1)
    c = float(mean_w - nu * mean1)
    return float(np.abs(w - c - nu * y1).max()), nu, c


@dataclass(frozen=True, eq=False)
class ModellednessResult:
    M: float
    nu: PhysicalField
    table: pd.DataFrame = field(repr=False)
    method: str = FIT_METHOD


def modelledness(
    u: PhysicalField,
    family: Optional[ModelFamily],
    a: Optional[PhysicalField],
    sigma: Optional[PhysicalField],
    alpha: float,
    params: Optional[HolderParams] = None,
) -> ModellednessResult:
    """
    Ball form of the modelledness constant.

    For each base point x0 and dyadic R <= 1/2, w = u - sigma(x0) v(., a(x0))
    is fitted on B_R(x0) by c + nu y1 in least squares; the sup residual over
    the ball divided by R^(2 alpha) enters the table and M is its max.
    nu(x0) comes from the smallest radius whose ball has at least 25 points.
    A missing family or sigma means the zero model.

    Args:
        u: the modelled function
        family: model family v(., a0)
        a: coefficient field, pointwise inside the family's box
        sigma: modulation field
        alpha: Hölder exponent
        params: base-point stride

    Returns:
        ModellednessResult: M, the modulation nu and the per-(x0, R) table
    """
    params = params or HolderParams(alpha)
    grid = u.grid
    values = u.values
    b1, b2 = _base_points(grid, params.base_point_stride)

    model = None
    if family is not None and sigma is not None:
        if a is None:
            raise ValueError("modelledness against a family needs the coefficient field a")
        stack = family.stack("v")
        a_base = a.values[b1, b2]
        inside = family.box.contains(a_base)
        if not inside.all():
            raise EllipticityError(f"ellipticity violated at {int((~inside).sum())} base points")
        weights = interpolation_basis(stack.nodes, a_base)
        model = (weights, stack.values, sigma.values[b1, b2])

    radii = _radii(grid)
    rows: List[Dict[str, Any]] = []
    nu_base = np.zeros(b1.size)
    for idx in range(b1.size):
        x1, x2 = int(b1[idx]), int(b2[idx])
        if model is not None:
            weights, node_values, sigma_base = model
            v_at = np.tensordot(weights[idx], node_values, axes=1)
            w_field = values - sigma_base[idx] * v_at
        else:
            w_field = values
        nu_here = None
        for R, m1, m2 in reversed(radii):
            w = w_field[(x1 + m1) % grid.n1, (x2 + m2) % grid.n2]
            fit = _affine_fit(m1 * grid.h1, w)
            if fit is None:
                continue
            residual, nu, _ = fit
            if nu_here is None and m1.size >= NU_BALL_POINTS:
                nu_here = nu
            rows.append({
                "x0_1": x1 * grid.h1,
                "x0_2": x2 * grid.h2,
                "R": R,
                "points": int(m1.size),
                "residual": residual,
                "scaled": residual / R ** (2.0 * alpha),
                "nu": nu,
            })
        nu_base[idx] = nu_here if nu_here is not None else 0.0

    table = pd.DataFrame(rows, columns=["x0_1", "x0_2", "R", "points", "residual", "scaled", "nu"])
    M = float(table["scaled"].max()) if len(table) else 0.0
    return ModellednessResult(M=M, nu=_spread(grid, nu_base, params.base_point_stride), table=table)


def _spread(grid: GridSpec, base_values: np.ndarray, stride: int) -> PhysicalField:
    """Piecewise-constant extension of base-point values to the whole grid."""
    n1b = len(range(0, grid.n1, stride))
    n2b = len(range(0, grid.n2, stride))
    coarse = base_values.reshape(n1b, n2b)
    i1 = np.minimum(np.arange(grid.n1) // stride, n1b - 1)
    i2 = np.minimum(np.arange(grid.n2) // stride, n2b - 1)
    return PhysicalField(grid, coarse[np.ix_(i1, i2)])


def c2alpha_seminorm(u: PhysicalField, alpha: float, params: Optional[HolderParams] = None) -> float:
    """
    Grid C^(2 alpha) seminorm: sup over base points and dyadic R <= 1/2 of
    R^(-2 alpha) inf over c + nu y1 of the sup residual on B_R(x0), with balls
    found from the metric and the fit done by lstsq.
    """
    params = params or HolderParams(alpha)
    grid = u.grid
    x1_all = np.arange(grid.n1)[:, None] * grid.h1 * np.ones((1, grid.n2))
    x2_all = np.ones((grid.n1, 1)) * np.arange(grid.n2)[None, :] * grid.h2
    b1, b2 = _base_points(grid, params.base_point_stride)
    best = 0.0
    for x1, x2 in zip(b1, b2):
        dx1 = (x1_all - x1 * grid.h1 + 0.5) % 1.0 - 0.5
        dist = np.abs(dx1) + np.sqrt(_periodic_gap(x2_all - x2 * grid.h2))
        R = MAX_RADIUS
        while True:
            mask = dist <= R + 1e-12
            if mask.sum() < MIN_BALL_POINTS:
                break
            y1 = dx1[mask]
            w = u.values[mask]
            if np.ptp(y1) > 0:
                design = np.column_stack([np.ones_like(y1), y1])
                coef, *_ = np.linalg.lstsq(design, w, rcond=None)
                best = max(best, float(np.abs(w - design @ coef).max()) / R ** (2.0 * alpha))
            R /= 2.0
    return best


# ============================================================================
# Scaling fits
# ============================================================================

@dataclass
class ScalingReport:
    """Log-log fit of value against T^(1/4)."""

    samples: List[Tuple[float, float]]
    slope: float
    intercept: float
    r2: float
    target_slope: float
    tolerance: float
    passed: bool
    statistic: str = ""
    mode: str = "slope"
    alpha_prime: Optional[float] = None
    records: List[Dict[str, Any]] = field(default_factory=list, repr=False)
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def bound(self) -> float:
        return max(value for _, value in self.samples)

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "statistic": self.statistic,
            "alpha_prime": self.alpha_prime,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "target": self.target_slope,
            "tolerance": self.tolerance,
            "mode": self.mode,
            "pass": bool(self.passed),
            "bound": self.bound,
            "points": [[float(T), float(v)] for T, v in self.samples],
        }
        out.update(self.extra)
        return out


def scaling_fit(
    samples: Sequence[Tuple[float, float]],
    target_slope: float,
    tolerance: float,
    statistic: str = "",
    mode: str = "slope",
    alpha_prime: Optional[float] = None,
    min_samples: int = MIN_FIT_SAMPLES,
) -> ScalingReport:
    """
    Least-squares line through (log T^(1/4), log value).

    mode "slope": pass iff |slope - target| <= tolerance.
    mode "bounded": pass iff slope >= -tolerance (no blow-up as T decreases).
    """
    samples = [(float(T), float(v)) for T, v in samples]
    if len(samples) < max(min_samples, 2):
        raise ValueError(f"scaling fit needs at least {max(min_samples, 2)} samples, got {len(samples)}")
    if any(v <= 0 or T <= 0 for T, v in samples):
        raise ValueError("scaling fit needs positive scales and values")
    if mode not in ("slope", "bounded"):
        raise ValueError(f"unknown fit mode '{mode}'")
    x = np.log(np.array([T for T, _ in samples]) ** 0.25)
    y = np.log(np.array([v for _, v in samples]))
    if np.ptp(y) == 0:
        slope, intercept, r2 = 0.0, float(y[0]), 1.0
    else:
        fit = stats.linregress(x, y)
        slope, intercept, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)
    if mode == "slope":
        passed = abs(slope - target_slope) <= tolerance
    else:
        passed = slope >= -tolerance
    return ScalingReport(
        samples=samples,
        slope=slope,
        intercept=intercept,
        r2=r2,
        target_slope=target_slope,
        tolerance=tolerance,
        passed=bool(passed),
        statistic=statistic,
        mode=mode,
        alpha_prime=alpha_prime,
    )

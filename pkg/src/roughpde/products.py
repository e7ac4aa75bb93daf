"""
Renormalization constants, renormalized products and commutators.

    c1(eps, a0)      = <v_eps(., a0) f_eps>          = sum_k Re G(k,a0) C(k) psi_eps(k)^2
    c2(eps, a0, a0') = <v_eps(., a0) d1^2 v_eps(., a0')>
                     = -sum_k k1^2 Re[G(k,a0) conj G(k,a0')] C(k) psi_eps(k)^2

a0-derivatives of either constant differentiate the Green symbols term by
term. Sums run over a truncated lattice: the sampling grid when the constants
must match sampled fields exactly, or a lattice sized to eps when the limit
eps -> 0 is studied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from .grid import Field, GridSpec, PhysicalField, SpectralField, as_physical, as_spectral, require_same_grid
from .heat import ModelFamily, NodeStack, a0_derivative, evaluate_E, solve_heat
from .noise import CovarianceSpec, alt_mollifier_hat, covariance_at, mollifier_hat
from .parallel import map_ordered
from .semigroup import mollify, x1_commutator

PAIRINGS = ("vf", "v_d2v")
# Rows of the lattice summed per block
ROW_CHUNK = 8
# eps (k1^4 + k2^2) beyond which psi_eps^2 <= exp(-2 EPS_TAIL) is dropped
EPS_TAIL = 20.0
BAND_LIMIT_RTOL = 1e-13


def lattice_for_eps(spec: CovarianceSpec, eps: float) -> GridSpec:
    """Smallest even lattice on which psi_eps^2 has decayed below exp(-40)."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    n1 = 2 * int(math.ceil((2.0 * EPS_TAIL / eps) ** 0.25 / (2.0 * np.pi))) + 2
    if spec.form == "spatial_only":
        n2 = 8
    else:
        n2 = 2 * int(math.ceil(math.sqrt(EPS_TAIL / eps) / (2.0 * np.pi))) + 2
    return GridSpec(max(n1, 8), max(n2, 8))


def _green_rows(lattice: GridSpec, rows: slice, a0: float, n: int) -> np.ndarray:
    """d^n G / da0^n on a block of lattice rows."""
    k1 = lattice.k1_vec[rows][:, None]
    k2 = lattice.k2_odd_vec[None, :]
    denominator = a0 * k1 ** 2 + 1j * k2
    green = np.zeros(np.broadcast(k1, k2).shape, dtype=np.complex128)
    nonzero = denominator != 0
    green[nonzero] = 1.0 / denominator[nonzero]
    return (-1) ** n * math.factorial(n) * k1 ** (2 * n) * green ** (n + 1)


def _weights_rows(spec: CovarianceSpec, lattice: GridSpec, rows: slice, eps: float, mollifier: str) -> np.ndarray:
    k1 = lattice.k1_vec[rows][:, None]
    k2 = lattice.k2_vec[None, :]
    hat = mollifier_hat(eps, k1, k2) if mollifier == "semigroup" else alt_mollifier_hat(eps, k1, k2)
    return covariance_at(spec, k1, k2) * hat ** 2


def lattice_sums(
    spec: CovarianceSpec,
    eps: float,
    a0s: Sequence[float],
    a0ps: Sequence[float],
    cutoff: Optional[GridSpec] = None,
    n: int = 0,
    n_p: int = 0,
    mollifier: str = "semigroup",
) -> Tuple[np.ndarray, np.ndarray]:
    """
    c1 derivatives at every a0 and c2 derivatives at every (a0, a0').

    Returns:
        tuple: (c1 of shape (len(a0s),), c2 of shape (len(a0s), len(a0ps)))
    """
    lattice = cutoff or lattice_for_eps(spec, eps)
    c1 = np.zeros(len(a0s))
    c2 = np.zeros((len(a0s), len(a0ps)))
    for start in range(0, lattice.n1, ROW_CHUNK):
        rows = slice(start, min(start + ROW_CHUNK, lattice.n1))
        weights = _weights_rows(spec, lattice, rows, eps, mollifier)
        if not weights.any():
            continue
        k1sq = lattice.k1_vec[rows][:, None] ** 2
        left = np.stack([_green_rows(lattice, rows, a0, n) for a0 in a0s])
        right = np.stack([_green_rows(lattice, rows, a0p, n_p) for a0p in a0ps])
        c1 += (left.real * weights).sum(axis=(1, 2))
        c2 -= np.einsum("iab,jab->ij", left * (k1sq * weights), np.conj(right)).real
    return c1, c2


def renorm_c1(spec: CovarianceSpec, eps: float, a0: float, cutoff: Optional[GridSpec] = None, mollifier: str = "semigroup") -> float:
    """c1(eps, a0) summed over `cutoff` (default: a lattice sized to eps)."""
    c1, _ = lattice_sums(spec, eps, [a0], [a0], cutoff, mollifier=mollifier)
    return float(c1[0])


def renorm_c2(spec: CovarianceSpec, eps: float, a0: float, a0p: float, cutoff: Optional[GridSpec] = None, mollifier: str = "semigroup") -> float:
    """c2(eps, a0, a0'); symmetric in (a0, a0'), unlike its mixed a0-derivatives."""
    _, c2 = lattice_sums(spec, eps, [a0], [a0p], cutoff, mollifier=mollifier)
    return float(c2[0, 0])


def renorm_c1_derivative(spec: CovarianceSpec, eps: float, a0: float, n: int, cutoff: Optional[GridSpec] = None) -> float:
    """d^n c1 / da0^n by term-wise differentiation."""
    c1, _ = lattice_sums(spec, eps, [a0], [a0], cutoff, n=n)
    return float(c1[0])


def renorm_c2_derivative(
    spec: CovarianceSpec, eps: float, a0: float, a0p: float, n: int, n_p: int, cutoff: Optional[GridSpec] = None
) -> float:
    """d^n/da0^n d^n'/da0'^n' c2 by term-wise differentiation."""
    _, c2 = lattice_sums(spec, eps, [a0], [a0p], cutoff, n=n, n_p=n_p)
    return float(c2[0, 0])


def pairing_constant(
    spec: CovarianceSpec,
    eps: float,
    a0: float,
    a0p: float,
    pairing: str,
    n: int = 0,
    n_p: int = 0,
    cutoff: Optional[GridSpec] = None,
    mollifier: str = "semigroup",
) -> float:
    """The expectation subtracted by the given pairing: c1 (vf) or c2 (v_d2v), differentiated."""
    c1, c2 = lattice_sums(spec, eps, [a0], [a0p], cutoff, n=n, n_p=n_p, mollifier=mollifier)
    if pairing == "vf":
        return float(c1[0])
    if pairing == "v_d2v":
        return float(c2[0, 0])
    raise ValueError(f"unknown pairing '{pairing}' (expected one of {', '.join(PAIRINGS)})")


def kernel_ratio_range(lattice: GridSpec, a0s: Sequence[float]) -> Tuple[float, float]:
    """
    Range over k and a0, a0', a0'' in a0s of the per-mode kernel ratio
    -k1^2 Re[G(a0) conj G(a0')] / Re G(a0''), on modes with k1 != 0.
    """
    low, high = np.inf, -np.inf
    rows = slice(0, lattice.n1)
    keep = (lattice.k1_vec != 0)[:, None] & np.ones((1, lattice.n2), dtype=bool)
    k1sq = lattice.k1_vec[:, None] ** 2
    greens = {a0: _green_rows(lattice, rows, a0, 0) for a0 in a0s}
    for a0 in a0s:
        for a0p in a0s:
            kernel = -(k1sq * greens[a0] * np.conj(greens[a0p])).real
            for a0pp in a0s:
                ratio = np.abs(kernel[keep] / greens[a0pp].real[keep])
                low, high = min(low, float(ratio.min())), max(high, float(ratio.max()))
    return low, high


# ============================================================================
# Constant tables
# ============================================================================

@dataclass(frozen=True, eq=False)
class RenormConstants:
    """
    c1 on (eps, a0) and c2 on (eps, a0, a0') node tables, with pointwise
    interpolation in a0 for the solver.
    """

    eps_list: Tuple[float, ...]
    a0_nodes: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    cutoff: str = "none"
    spec: Optional[CovarianceSpec] = None
    mollifier: str = "semigroup"
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        n_eps, n_nodes = len(self.eps_list), len(self.a0_nodes)
        if np.shape(self.c1) != (n_eps, n_nodes) or np.shape(self.c2) != (n_eps, n_nodes, n_nodes):
            raise ValueError("constant tables do not match the eps list and a0 nodes")

    def index(self, eps: float) -> int:
        for i, value in enumerate(self.eps_list):
            if math.isclose(value, eps, rel_tol=1e-12, abs_tol=0.0):
                return i
        raise KeyError(f"eps={eps} not in the constant table")

    def _spline(self, values: np.ndarray):
        if len(self.a0_nodes) == 1 or np.ptp(values) == 0:
            constant = float(values[0])
            return lambda a: np.full(np.shape(a), constant)
        return CubicSpline(self.a0_nodes, values)

    def c1_at(self, eps: float, a0) -> np.ndarray:
        """c1(eps, a0) at arbitrary a0 by cubic interpolation."""
        return np.asarray(self._spline(self.c1[self.index(eps)])(np.asarray(a0, dtype=np.float64)))

    def c2_diag_at(self, eps: float, a0) -> np.ndarray:
        """c2(eps, a0, a0) at arbitrary a0 by cubic interpolation of the diagonal."""
        return np.asarray(self._spline(np.diag(self.c2[self.index(eps)]))(np.asarray(a0, dtype=np.float64)))

    def scaled(self, factor: float) -> "RenormConstants":
        return replace(self, c1=factor * self.c1, c2=factor * self.c2)

    @classmethod
    def constant(cls, g1: float, g2: float, eps_list: Sequence[float], a0_nodes: Sequence[float]) -> "RenormConstants":
        """Tables equal to g1 and g2 everywhere."""
        nodes = np.asarray(a0_nodes, dtype=np.float64)
        n_eps = len(eps_list)
        return cls(
            eps_list=tuple(float(e) for e in eps_list),
            a0_nodes=nodes,
            c1=np.full((n_eps, len(nodes)), float(g1)),
            c2=np.full((n_eps, len(nodes), len(nodes)), float(g2)),
            cutoff="none",
        )

    @classmethod
    def zeros(cls, eps_list: Sequence[float], a0_nodes: Sequence[float]) -> "RenormConstants":
        return cls.constant(0.0, 0.0, eps_list, a0_nodes)

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns eps, a0, a0p, c1, c2, cutoff."""
        rows = []
        for e, eps in enumerate(self.eps_list):
            for i, a0 in enumerate(self.a0_nodes):
                for j, a0p in enumerate(self.a0_nodes):
                    rows.append({
                        "eps": eps,
                        "a0": float(a0),
                        "a0p": float(a0p),
                        "c1": float(self.c1[e, i]),
                        "c2": float(self.c2[e, i, j]),
                        "cutoff": self.cutoff,
                    })
        return pd.DataFrame(rows, columns=["eps", "a0", "a0p", "c1", "c2", "cutoff"])


def constant_nodes(lambda_: float, n_nodes: int = 9) -> np.ndarray:
    """Uniform a0 nodes of [lambda, 1] for the constant tables."""
    if lambda_ == 1.0:
        return np.array([1.0])
    return np.linspace(lambda_, 1.0, n_nodes)


def build_constants(
    spec: CovarianceSpec,
    eps_list: Sequence[float],
    a0_nodes: Sequence[float],
    cutoff: Optional[GridSpec] = None,
    mollifier: str = "semigroup",
    workers: Optional[int] = None,
) -> RenormConstants:
    """
    Fill the c1/c2 tables, one eps per task.

    Args:
        spec: noise spectrum
        eps_list: regularizations
        a0_nodes: a0 nodes (also used for a0')
        cutoff: lattice the sums run over; None sizes a lattice per eps
        mollifier: "semigroup" or "gaussian"
        workers: thread count

    Returns:
        RenormConstants: the tables
    """
    nodes = np.asarray(a0_nodes, dtype=np.float64)
    results = map_ordered(lambda eps: lattice_sums(spec, eps, nodes, nodes, cutoff, mollifier=mollifier), eps_list, workers)
    label = f"{cutoff.n1}x{cutoff.n2}" if cutoff is not None else "eps-adapted"
    return RenormConstants(
        eps_list=tuple(float(e) for e in eps_list),
        a0_nodes=nodes,
        c1=np.stack([c1 for c1, _ in results]),
        c2=np.stack([c2 for _, c2 in results]),
        cutoff=label,
        spec=spec,
        mollifier=mollifier,
    )


# ============================================================================
# Renormalized products and commutators
# ============================================================================

@dataclass(frozen=True, eq=False)
class CommutatorField:
    """[g, (.)_T] h = g h_T - (g<>h)_T with its provenance."""

    T: float
    field: PhysicalField
    metadata: Dict[str, Any] = field(default_factory=dict)


def renorm_product(g: Field, h: Field, c: float) -> PhysicalField:
    """Pointwise g h - c."""
    require_same_grid(g, h)
    return PhysicalField(g.grid, as_physical(g).values * as_physical(h).values - c)


def commutator(g: Field, h: Field, gh_renorm: PhysicalField, T: float, **metadata) -> CommutatorField:
    """g h_T - (g<>h)_T for a given renormalized product g<>h."""
    require_same_grid(g, h)
    h_T = as_physical(mollify(as_spectral(h), T)).values
    gh_T = as_physical(mollify(as_spectral(gh_renorm), T)).values
    values = as_physical(g).values * h_T - gh_T
    return CommutatorField(T, PhysicalField(g.grid, values), dict(metadata))


def semigroup_commutator_residual(g: Field, h: Field, gh_renorm: PhysicalField, t: float, T: float) -> float:
    """
    Max-norm of [g,(.)_(t+T)]<>h - ([g,(.)_T]<>h)_t - [g,(.)_t] h_T.
    Zero up to round-off for any choice of the renormalized product.
    """
    lhs = commutator(g, h, gh_renorm, t + T).field.values - as_physical(
        mollify(as_spectral(commutator(g, h, gh_renorm, T).field), t)
    ).values
    h_T = as_physical(mollify(as_spectral(h), T))
    gh_T = PhysicalField(g.grid, as_physical(g).values * h_T.values)
    rhs = commutator(g, h_T, gh_T, t).field.values
    return float(np.abs(lhs - rhs).max())


def pairing_fields(f_eps: SpectralField, a0: float, a0p: float, pairing: str, n: int = 0, n_p: int = 0) -> Tuple[SpectralField, SpectralField]:
    """(g, h) = (d^n v(a0), f_eps) for vf, (d^n v(a0), d1^2 d^n' v(a0')) for v_d2v."""
    g = a0_derivative(f_eps, a0, n) if n else solve_heat(f_eps, a0)
    if pairing == "vf":
        return g, f_eps
    if pairing == "v_d2v":
        h = a0_derivative(f_eps, a0p, n_p) if n_p else solve_heat(f_eps, a0p)
        return g, SpectralField(h.grid, -h.grid.k1 ** 2 * h.coeffs)
    raise ValueError(f"unknown pairing '{pairing}' (expected one of {', '.join(PAIRINGS)})")


def model_commutator(
    f_eps: SpectralField,
    a0: float,
    a0p: float,
    pairing: str,
    n: int,
    n_p: int,
    c: float,
    T: float,
) -> CommutatorField:
    """Renormalized commutator of a model pairing with subtraction constant c."""
    g, h = pairing_fields(f_eps, a0, a0p, pairing, n, n_p)
    return commutator(
        g, h, renorm_product(g, h, c), T,
        pairing=pairing, a0=a0, a0p=a0p, n=n, n_p=n_p, c=c, renormalized=c != 0,
    )


def is_band_limited(f: Field) -> bool:
    """True when every mode with |j1| > n1/4 or |j2| > n2/4 vanishes."""
    coeffs = as_spectral(f).coeffs
    grid = f.grid
    scale = np.abs(coeffs).max()
    if scale == 0:
        return True
    high = (np.abs(grid.j1_vec)[:, None] > grid.n1 / 4) | (np.abs(grid.j2_vec)[None, :] > grid.n2 / 4)
    return bool(np.abs(coeffs[high]).max(initial=0.0) <= BAND_LIMIT_RTOL * scale)


def commutator_family(family: ModelFamily, f: Field, T: float, c1: Optional[Callable[[float], float]] = None) -> NodeStack:
    """[v(., a0), (.)_T]<>f at the family nodes, with v<>f = v f - c1(a0)."""
    fields = []
    for i, a0 in enumerate(family.a0_nodes):
        v = family.node_field("v", i)
        c = c1(a0) if c1 is not None else 0.0
        fields.append(commutator(v, f, renorm_product(v, f, c), T).field)
    return NodeStack.from_fields(family.a0_nodes, fields, family.box)


def reconstruction_residual(
    u: PhysicalField,
    sigma: PhysicalField,
    nu: PhysicalField,
    family: ModelFamily,
    comm_family: Optional[Callable[[float, float], CommutatorField]],
    f: Field,
    T: float,
    a: PhysicalField,
    candidate: Optional[PhysicalField] = None,
) -> float:
    """
    Max-norm of u f_T - (u<>f)_T - sigma E[v,(.)_T]<>f - nu [x1,(.)_T] f.

    For band-limited f the classical product u f is the candidate u<>f; a
    rough f needs an explicit candidate.
    """
    if candidate is None:
        if not is_band_limited(f):
            raise ValueError("reconstruction residual of a rough forcing needs a candidate product u<>f")
        candidate = PhysicalField(u.grid, u.values * as_physical(f).values)
    if comm_family is None:
        stack = commutator_family(family, f, T)
    else:
        stack = NodeStack.from_fields(
            family.a0_nodes, [comm_family(a0, T).field for a0 in family.a0_nodes], family.box
        )
    f_T = as_physical(mollify(as_spectral(f), T)).values
    candidate_T = as_physical(mollify(as_spectral(candidate), T)).values
    model_part = sigma.values * evaluate_E(stack, a).values
    x1_part = nu.values * as_physical(x1_commutator(as_spectral(f), T)).values
    return float(np.abs(u.values * f_T - candidate_T - model_part - x1_part).max())

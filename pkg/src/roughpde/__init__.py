"""
roughpde - numerical experiments for quasilinear parabolic equations

    d2 u - a(u) d1^2 u = sigma(u) f

on the torus, with rough stationary Gaussian forcing f, the renormalized
products that make the equation meaningful, and the stochastic estimates
that justify them.
"""

__version__ = "0.1.0"

from .config import ConfigError, RunConfig, build_config, load_config
from .grid import GridError, GridSpec, PhysicalField, SpectralField, as_physical, as_spectral
from .noise import CovarianceSpec, SeedSpec, SpecError, mollify_noise, sample_noise
from .semigroup import dyadic_scales, mollify
from .solver import NonlinearityPair, SolveParams, SolveResult, solve_quasilinear

__all__ = [
    "ConfigError",
    "CovarianceSpec",
    "GridError",
    "GridSpec",
    "NonlinearityPair",
    "PhysicalField",
    "RunConfig",
    "SeedSpec",
    "SolveParams",
    "SolveResult",
    "SpecError",
    "SpectralField",
    "as_physical",
    "as_spectral",
    "build_config",
    "dyadic_scales",
    "load_config",
    "mollify",
    "mollify_noise",
    "sample_noise",
    "solve_quasilinear",
]

#!/usr/bin/env python3
"""
roughpde experiment runner.

Every subcommand reads one config (JSON or YAML), runs deterministically from
(config, seed) and writes its artifacts to the output directory as
<subcommand>-<confighash[:12]>-s<seed>[-suffix].<ext>.

Exit codes:
    0  success
    1  a pass flag is false, or an unexpected error
    2  usage or config error

Environment Variables:
- ROUGHPDE_OUT_DIR: Default output directory (default: ./runs)
- ROUGHPDE_WORKERS: Worker threads for sample loops (default: physical cores)
- ROUGHPDE_VERBOSE: Per-iteration solver logging (default: 0)
"""

from __future__ import annotations

import argparse
import math
import sys
import traceback
from dataclasses import replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .artifacts import ArtifactWriter, config_hash
from .config import ConfigError, RunConfig, build_config, read_config_file
from .grid import GridError, GridSpec, as_physical, check_hermitian
from .heat import build_family, interpolate_family, solve_heat
from .logs import check_results, log, record_check, summarize_checks
from .noise import CovarianceSpec, SpecError, mollify_noise, sample_noise, spectrum_table
from .norms import HolderParams, c2alpha_seminorm, modelledness, sup_norm
from .parallel import map_samples, pairwise_mean
from .products import build_constants, constant_nodes, pairing_constant, pairing_fields, renorm_product, semigroup_commutator_residual
from .semigroup import semigroup_residual, t_min
from .solver import (
    NonlinearityPair,
    SolveParams,
    band_limit,
    calibrate_eta,
    classical_check,
    eps_continuation,
    eta_sweep,
    solve_quasilinear,
)
from .stochastic_verify import (
    LIMIT_STABILITY_TARGET,
    ExperimentPlan,
    renorm_limit_study,
    renorm_mc_crosscheck,
    verify_commutator_scaling,
    verify_eps_convergence,
    verify_eps_difference,
    verify_noise_scaling,
    verify_schauder,
    verify_x1_commutator,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

SUBCOMMANDS = (
    "sample-noise",
    "verify-scaling",
    "renorm-table",
    "solve",
    "eps-sweep",
    "eta-sweep",
    "classical-check",
    "all",
)

IDENTITY_SAMPLES = 8
IDENTITY_PAIRS = 20
SEMIGROUP_TOL = 1e-13
COMMUTATOR_ALGEBRA_TOL = 1e-12
# Largest t, T for the identity checks; beyond it f_T is dominated by rounding of larger modes
IDENTITY_MAX_SCALE = 2.0 ** -4
CONTRACTION_LIMIT = 0.5
MODELLED_TOL = 1e-9
C2ALPHA_AGREEMENT = 0.1
MODELLED_GRID = 32
MC_CROSSCHECK_EPS = 2.0 ** -6
DICHOTOMY_SPECS = (
    {"form": "product", "lambda1": 1.5, "lambda2": 0.0, "alpha": 0.7},
    {"form": "product", "lambda1": 0.4, "lambda2": 0.0, "alpha": 0.7},
)


def parse_grid(text: str) -> Tuple[int, int]:
    """'128x64' -> (128, 64)."""
    parts = text.lower().split("x")
    if len(parts) != 2 or not all(part.strip().isdigit() for part in parts):
        raise ConfigError(f"--grid: expected N1xN2, got '{text}'")
    return int(parts[0]), int(parts[1])


def flag_overrides(seed: Optional[int] = None, grid: Optional[str] = None, samples: Optional[int] = None) -> List[str]:
    overrides = []
    if seed is not None:
        overrides.append(f"seeds.master={seed}")
    if grid:
        n1, n2 = parse_grid(grid)
        overrides += [f"grid.n1={n1}", f"grid.n2={n2}"]
    if samples is not None:
        overrides.append(f"plan.n_samples={samples}")
    return overrides


# ============================================================================
# Shared setup
# ============================================================================

def nonlinearities(config: RunConfig) -> NonlinearityPair:
    nl = NonlinearityPair.default(config.solver["sigma"])
    valid, error = nl.check()
    if not valid:
        raise ValueError(f"nonlinearities violate the standing assumptions: {error}")
    return nl


def solve_params(config: RunConfig, eta: float) -> SolveParams:
    solver = config.solver
    return SolveParams(
        eta=eta,
        eps=float(solver["eps"]),
        a0_star_policy=solver["a0_star_policy"],
        damping=float(solver["damping"]),
        tol=float(solver["tol"]),
        max_iters=int(solver["max_iters"]),
        dealias=bool(solver["dealias"]),
        renormalize=bool(solver["renormalize"]),
        alpha=config.spec.alpha,
        alpha_prime=config.alpha_prime,
        stride=int(solver["stride"]),
        T_list=tuple(config.T_list),
    )


def solver_forcing(config: RunConfig, purpose: str = "solve"):
    return sample_noise(config.spec, config.grid, config.seed, 0, purpose)


def solver_eta(config: RunConfig, f) -> float:
    """Configured eta, or eta calibrated so that the regularized forcing has N0 = target_N0."""
    solver = config.solver
    if solver["eta"] is not None:
        return float(solver["eta"])
    eta = calibrate_eta(mollify_noise(f, float(solver["eps"])), float(solver["target_N0"]), config.spec.alpha, config.T_list)
    log(f"eta calibrated to {eta:.4g} for N0 = {solver['target_N0']}")
    return eta


def _convergence_kappa(kappa: float) -> float:
    return kappa if 0.0 < kappa <= 1.0 else 0.5


# ============================================================================
# Subcommands
# ============================================================================

def cmd_sample_noise(config: RunConfig, writer: ArtifactWriter) -> bool:
    """One noise sample as a field snapshot, plus the sample-averaged spectrum per |j1| shell."""
    spec, grid, seed = config.spec, config.grid, config.seed
    n_samples = int(config.plan["n_samples"])
    f = sample_noise(spec, grid, seed, 0)
    writer.write_snapshot(as_physical(f))

    expected = spectrum_table(spec, grid)
    power = pairwise_mean(map_samples(lambda i: np.abs(sample_noise(spec, grid, seed, i).coeffs) ** 2, n_samples))
    shells = np.abs(grid.j1_vec)
    frame = pd.DataFrame([
        {
            "j1": shell,
            "empirical": float(power[shells == shell].mean()),
            "expected": float(expected[shells == shell].mean()),
        }
        for shell in range(grid.n1 // 2 + 1)
    ])
    writer.write_csv(frame, suffix="-spectrum")

    hermitian, deviation = check_hermitian(f)
    values = as_physical(f).values
    record_check("noise_hermitian", hermitian, f"deviation {deviation:.2e}")
    writer.write_json({
        "variance": float(values.var()),
        "expected_variance": float(expected.sum()),
        "sup": float(np.abs(values).max()),
        "hermitian_deviation": deviation,
        "n_samples": n_samples,
        "a2": spec.a2,
        "pass": hermitian,
    })
    return hermitian


def cmd_verify_scaling(config: RunConfig, writer: ArtifactWriter) -> bool:
    plan = ExperimentPlan.from_config(config)
    kappa = float(config.plan["kappa"])
    reports = {
        "noise_scaling": verify_noise_scaling(plan),
        "eps_difference": verify_eps_difference(plan, kappa),
        "commutator_vf": verify_commutator_scaling(plan, "vf"),
        "commutator_v_d2v": verify_commutator_scaling(plan, "v_d2v"),
        "eps_convergence_vf": verify_eps_convergence(plan, "vf", _convergence_kappa(kappa)),
    }
    for name, report in reports.items():
        record_check(name, report.passed, f"slope {report.slope:.3f} ({report.mode}, target {report.target_slope:.3f})")
    writer.write_ndjson([r for report in reports.values() for r in report.records])
    passed = all(report.passed for report in reports.values())
    writer.write_json({"reports": {name: report.to_dict() for name, report in reports.items()}, "pass": passed})
    return passed


def cmd_renorm_table(config: RunConfig, writer: ArtifactWriter) -> bool:
    spec, renorm = config.spec, config.renorm
    eps_list = [float(e) for e in renorm["eps_list"]]
    report = renorm_limit_study(spec, eps_list, float(renorm["a0"]), float(renorm["a0p"]))
    table = build_constants(spec, eps_list, constant_nodes(float(config.plan["lambda"])))
    writer.write_csv(table.to_frame(), suffix="-constants")
    writer.write_csv(report.table, suffix="-limit")
    record_check("renorm_dichotomy", report.consistent, f"verdict {report.verdict}, summable spectrum: {report.a2}")
    writer.write_json({**report.to_dict(), "pass": report.consistent})
    return report.consistent


def cmd_solve(config: RunConfig, writer: ArtifactWriter) -> bool:
    nl = nonlinearities(config)
    f = solver_forcing(config)
    params = solve_params(config, solver_eta(config, f))
    result = solve_quasilinear(f, params.eps, nl, params, spec=config.spec)
    writer.write_snapshot(result.u)
    writer.write_csv(pd.DataFrame(result.history), suffix="-history")
    record_check("solve_converged", result.converged, f"{result.iters} iterations, ratio {result.contraction_ratio:.3f}")
    writer.write_json({**result.to_dict(), "nonlinearity": nl.name, "pass": result.converged})
    return result.converged


def cmd_eps_sweep(config: RunConfig, writer: ArtifactWriter) -> bool:
    nl = nonlinearities(config)
    f = solver_forcing(config)
    params = replace(solve_params(config, solver_eta(config, f)), diagnostics=False)
    eps_list = [float(e) for e in config.solver["eps_list"]]
    renormalized = eps_continuation(f, eps_list, nl, params, config.spec)
    plain = eps_continuation(f, eps_list, nl, replace(params, renormalize=False), config.spec)
    writer.write_csv(renormalized.table, suffix="-renormalized")
    writer.write_csv(plain.table, suffix="-plain")
    passed = renormalized.decreasing and not renormalized.aborted
    record_check("eps_sweep_cauchy", passed, f"increments {list(renormalized.table['sup_diff'])}")
    log(f"without renormalization the increments {'decrease' if plain.decreasing else 'do not decrease'}")
    writer.write_json({
        "eta": params.eta,
        "renormalized": {"decreasing": renormalized.decreasing, "aborted": renormalized.aborted},
        "plain": {"decreasing": plain.decreasing, "aborted": plain.aborted},
        "a2": config.spec.a2,
        "pass": passed,
    })
    return passed


def cmd_eta_sweep(config: RunConfig, writer: ArtifactWriter) -> bool:
    nl = nonlinearities(config)
    f = solver_forcing(config)
    params = solve_params(config, solver_eta(config, f))
    sweep = eta_sweep(f, params.eps, nl, params, [float(x) for x in config.solver["eta_factors"]], config.spec)
    writer.write_csv(sweep.table)
    record_check("eta_sweep", sweep.passed, f"holder slope {sweep.holder_slope:.3f}, M slope {sweep.M_slope:.3f}")
    writer.write_json({**sweep.to_dict(), "eta": params.eta})
    return sweep.passed


def _classical_reports(config: RunConfig) -> List[Dict[str, Any]]:
    nl = nonlinearities(config)
    f = band_limit(solver_forcing(config, "classical"), int(config.solver["classical_modes"]) // 2)
    params = replace(solve_params(config, solver_eta(config, f)), diagnostics=False)
    shifts = [(0.0, 0.0)]
    configured = (float(config.solver["g1"]), float(config.solver["g2"]))
    if configured != shifts[0]:
        shifts.append(configured)
    return [classical_check(f, g1, g2, nl, params) for g1, g2 in shifts]


def cmd_classical_check(config: RunConfig, writer: ArtifactWriter) -> bool:
    reports = _classical_reports(config)
    for report in reports:
        record_check(
            f"classical_g1={report['g1']:g}_g2={report['g2']:g}",
            report["pass"],
            f"discrepancy {report['discrepancy']:.2e}",
        )
    passed = all(report["pass"] for report in reports)
    writer.write_json({"checks": reports, "pass": passed})
    return passed


# ============================================================================
# Acceptance battery
# ============================================================================

def _identity_pairs(config: RunConfig, purpose: str, count: int) -> List[Tuple[float, float]]:
    rng = config.seed.rng(0, purpose)
    low = math.log(2.0 * t_min(config.grid))
    high = math.log(IDENTITY_MAX_SCALE)
    draws = np.exp(rng.uniform(low, high, size=(count, 2)))
    return [(float(t), float(T)) for t, T in draws]


def criterion_semigroup(config: RunConfig) -> Tuple[bool, Dict[str, Any]]:
    pairs = _identity_pairs(config, "semigroup-pairs", IDENTITY_PAIRS)
    worst = max(
        semigroup_residual(sample_noise(config.spec, config.grid, config.seed, i, "identity"), t, T)
        for i in range(IDENTITY_SAMPLES)
        for t, T in pairs
    )
    return worst <= SEMIGROUP_TOL, {"max_relative_residual": worst, "tolerance": SEMIGROUP_TOL}


def criterion_commutator_algebra(config: RunConfig) -> Tuple[bool, Dict[str, Any]]:
    pairs = _identity_pairs(config, "commutator-pairs", IDENTITY_PAIRS // 4)
    eps = float(config.solver["eps"])
    a0 = float(config.plan["a0_list"][0])
    c = pairing_constant(config.spec, eps, a0, a0, "vf", cutoff=config.grid)
    worst = 0.0
    for i in range(IDENTITY_SAMPLES):
        f_eps = mollify_noise(sample_noise(config.spec, config.grid, config.seed, i, "identity"), eps)
        g, h = pairing_fields(f_eps, a0, a0, "vf")
        scale = sup_norm(g) * sup_norm(h)
        for constant in (c, 0.0):
            gh = renorm_product(g, h, constant)
            for t, T in pairs:
                worst = max(worst, semigroup_commutator_residual(g, h, gh, t, T) / scale)
    return worst <= COMMUTATOR_ALGEBRA_TOL, {"max_relative_residual": worst, "tolerance": COMMUTATOR_ALGEBRA_TOL}


def _outcome(report) -> Tuple[bool, Dict[str, Any]]:
    return report.passed, report.to_dict()


def criterion_noise_scaling(plan: ExperimentPlan) -> Tuple[bool, Dict[str, Any]]:
    return _outcome(verify_noise_scaling(plan))


def criterion_commutator_moments(plan: ExperimentPlan) -> Tuple[bool, Dict[str, Any]]:
    vf = verify_commutator_scaling(plan, "vf")
    v_d2v = verify_commutator_scaling(plan, "v_d2v")
    return vf.passed and v_d2v.passed, {"vf": vf.to_dict(), "v_d2v": v_d2v.to_dict()}


def criterion_dichotomy(config: RunConfig, plan: ExperimentPlan) -> Tuple[bool, Dict[str, Any]]:
    eps_list = [float(e) for e in config.renorm["eps_list"]]
    summable, rough = (renorm_limit_study(CovarianceSpec.from_dict(s), eps_list) for s in DICHOTOMY_SPECS)
    crosscheck = renorm_mc_crosscheck(plan, MC_CROSSCHECK_EPS)
    passed = (
        summable.verdict == "converges"
        and rough.verdict == "diverges"
        and rough.c1_increasing
        and crosscheck.passed
    )
    dc1, dc2 = summable.last_increments
    log(f"summable spectrum: last increments dc1={dc1:.2e} dc2={dc2:.2e} (stability target {LIMIT_STABILITY_TARGET:.0e})")
    return passed, {"summable": summable.to_dict(), "rough": rough.to_dict(), "mc_crosscheck": crosscheck.to_dict()}


def criterion_solver(config: RunConfig) -> Tuple[bool, Dict[str, Any]]:
    nl = nonlinearities(config)
    f = solver_forcing(config)
    params = solve_params(config, solver_eta(config, f))
    result = solve_quasilinear(f, params.eps, nl, params, spec=config.spec)
    sweep = eta_sweep(f, params.eps, nl, params, [float(x) for x in config.solver["eta_factors"]], config.spec)
    contracting = result.converged and result.contraction_ratio < CONTRACTION_LIMIT
    return contracting and sweep.passed, {"solve": result.to_dict(), "eta_sweep": sweep.to_dict()}


def criterion_eps_continuation(config: RunConfig) -> Tuple[bool, Dict[str, Any]]:
    nl = nonlinearities(config)
    f = solver_forcing(config)
    params = replace(solve_params(config, solver_eta(config, f)), diagnostics=False)
    eps_list = [float(e) for e in config.solver["eps_list"]]
    renormalized = eps_continuation(f, eps_list, nl, params, config.spec)
    plain = eps_continuation(f, eps_list, nl, replace(params, renormalize=False), config.spec)
    passed = renormalized.decreasing and not renormalized.aborted
    return passed, {
        "renormalized_decreasing": renormalized.decreasing,
        "plain_decreasing": plain.decreasing,
        "a2": config.spec.a2,
    }


def criterion_classical(config: RunConfig) -> Tuple[bool, Dict[str, Any]]:
    reports = _classical_reports(config)
    return all(r["pass"] for r in reports), {"checks": reports}


def criterion_modelledness(config: RunConfig) -> Tuple[bool, Dict[str, Any]]:
    """A modelled function has M ~ 0; with the zero model M is the C^(2 alpha) seminorm."""
    grid = GridSpec(MODELLED_GRID, MODELLED_GRID)
    alpha = config.spec.alpha
    lambda_ = float(config.plan["lambda"])
    f = sample_noise(config.spec, grid, config.seed, 0, "modelledness")
    family = build_family(f, lambda_)
    a0 = 0.5 * (family.box.lower + family.box.upper)
    sigma0, shift = 0.8, 0.3
    v = as_physical(interpolate_family(family, a0, "v"))
    u = v.scaled(sigma0)
    u = type(u)(grid, u.values + shift)
    constant = lambda value: type(u)(grid, np.full(grid.shape, value))
    M_model = modelledness(u, family, constant(a0), constant(sigma0), alpha).M

    w = as_physical(solve_heat(f, 1.0))
    params = HolderParams(alpha)
    M_zero = modelledness(w, None, None, None, alpha, params).M
    direct = c2alpha_seminorm(w, alpha, params)
    agreement = abs(M_zero - direct) / direct if direct > 0 else abs(M_zero)
    passed = M_model <= MODELLED_TOL and agreement <= C2ALPHA_AGREEMENT
    return passed, {"M_modelled": M_model, "M_zero_model": M_zero, "c2alpha": direct, "relative_gap": agreement}


def acceptance_battery(config: RunConfig) -> List[Tuple[str, Callable[[], Tuple[bool, Dict[str, Any]]]]]:
    plan = ExperimentPlan.from_config(config)
    return [
        ("semigroup_identity", lambda: criterion_semigroup(config)),
        ("commutator_algebra", lambda: criterion_commutator_algebra(config)),
        ("noise_regularity", lambda: criterion_noise_scaling(plan)),
        ("commutator_moments", lambda: criterion_commutator_moments(plan)),
        ("renormalization_dichotomy", lambda: criterion_dichotomy(config, plan)),
        ("schauder", lambda: _outcome(verify_schauder(plan))),
        ("x1_commutator", lambda: _outcome(verify_x1_commutator(plan))),
        ("solver_contraction", lambda: criterion_solver(config)),
        ("eps_convergence", lambda: criterion_eps_continuation(config)),
        ("classical_equivalence", lambda: criterion_classical(config)),
        ("modelledness_oracle", lambda: criterion_modelledness(config)),
    ]


def cmd_all(config: RunConfig, writer: ArtifactWriter) -> bool:
    criteria = []
    for number, (name, check) in enumerate(acceptance_battery(config), start=1):
        log(f"[{number}/11] {name}")
        passed, details = check()
        record_check(f"{number:02d}_{name}", passed)
        criteria.append({"id": number, "name": name, "pass": bool(passed), "details": details})
    passed = all(c["pass"] for c in criteria)
    writer.write_json({"criteria": criteria, "pass": passed})
    return passed


COMMANDS: Dict[str, Callable[[RunConfig, ArtifactWriter], bool]] = {
    "sample-noise": cmd_sample_noise,
    "verify-scaling": cmd_verify_scaling,
    "renorm-table": cmd_renorm_table,
    "solve": cmd_solve,
    "eps-sweep": cmd_eps_sweep,
    "eta-sweep": cmd_eta_sweep,
    "classical-check": cmd_classical_check,
    "all": cmd_all,
}


# ============================================================================
# Entry points
# ============================================================================

def load_run_config(config_path=None, overrides: Iterable[str] = (), out_dir: Optional[str] = None) -> RunConfig:
    data = read_config_file(config_path) if config_path else {}
    if out_dir:
        data = {**data, "output": {**data.get("output", {}), "dir": str(out_dir)}}
    return build_config(data, overrides)


def run(subcommand: str, config_path=None, overrides: Sequence[str] = (), out_dir: Optional[str] = None) -> int:
    """
    Run one subcommand.

    Returns:
        int: exit code (0 success, 1 failed check or error, 2 usage/config error)
    """
    if subcommand not in COMMANDS:
        log(f"unknown subcommand '{subcommand}' (expected one of {', '.join(SUBCOMMANDS)})", "ERROR")
        return EXIT_USAGE
    try:
        config = load_run_config(config_path, overrides, out_dir)
    except (ConfigError, GridError, SpecError) as e:
        log(str(e), "ERROR")
        return EXIT_USAGE

    chash = config_hash(config.data)
    writer = ArtifactWriter(config.out_dir, subcommand, chash, config.seed.master_seed)
    log(f"{subcommand}: config {chash[:12]}, seed {config.seed.master_seed}, grid {config.grid.n1}x{config.grid.n2}")
    check_results.clear()
    try:
        passed = COMMANDS[subcommand](config, writer)
    except Exception as e:
        log(f"{subcommand} failed: {e}", "ERROR")
        traceback.print_exc()
        return EXIT_FAILURE
    summarize_checks()
    return EXIT_OK if passed else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughpde",
        description="Numerical experiments for quasilinear parabolic equations with rough forcing",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Scaling suites for the configured spectrum
  roughpde verify-scaling --config configs/white_time.json --seed 7

  # Renormalization constants and their eps -> 0 verdict
  roughpde renorm-table --config configs/white_time.json

  # One solve on a smaller grid with a fixed amplitude
  roughpde solve --config configs/white_time.json --grid 64x64 --override solver.eta=0.01
        """,
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="Experiment to run")
    parser.add_argument("--config", metavar="PATH", help="JSON or YAML config file")
    parser.add_argument("--seed", type=int, metavar="N", help="Master seed (seeds.master)")
    parser.add_argument("--grid", metavar="N1xN2", help="Grid size (grid.n1, grid.n2)")
    parser.add_argument("--samples", type=int, metavar="N", help="Monte Carlo samples (plan.n_samples)")
    parser.add_argument("--out", metavar="DIR", help="Output directory (output.dir)")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Set a config entry, e.g. solver.tol=1e-12 (repeatable)",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    try:
        overrides = flag_overrides(args.seed, args.grid, args.samples) + list(args.override)
    except ConfigError as e:
        log(str(e), "ERROR")
        return EXIT_USAGE
    return run(args.subcommand, args.config, overrides, args.out)


if __name__ == "__main__":
    sys.exit(main())

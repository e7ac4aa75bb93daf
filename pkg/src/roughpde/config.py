"""
Experiment configuration: documented defaults, JSON/YAML loading,
dotted-key overrides and schema validation.

A config file holds the sections grid, spec, seeds, plan, solver, renorm and
output. Unknown keys are rejected; spec.lambda1 and spec.alpha are required.

Environment Variables:
- ROUGHPDE_OUT_DIR: Default output directory (default: ./runs)
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace
from typing import Any, Dict, Iterable, List, Optional, Tuple

import yaml

from .grid import GridSpec, validate_sizes
from .noise import FORMS, CovarianceSpec, SeedSpec, admissible
from .semigroup import dyadic_scales
from .solver import A0_POLICIES, SIGMA_KINDS

ROUGHPDE_OUT_DIR = os.getenv("ROUGHPDE_OUT_DIR", "./runs")

REQUIRED = "<required>"
MIN_SAMPLES = 16

DEFAULT_CONFIG: Dict[str, Any] = {
    "grid": {"n1": 128, "n2": 128},
    "spec": {"form": "product", "lambda1": REQUIRED, "lambda2": 0.0, "alpha": REQUIRED},
    "seeds": {"master": 0},
    "plan": {
        "n_samples": 256,
        # null: dyadic scales the grid resolves
        "T_list": None,
        "eps_list": [2.0 ** -8, 2.0 ** -9, 2.0 ** -10, 2.0 ** -11],
        "a0_list": [0.6, 1.0],
        "a0p_list": [0.9, 1.0],
        "p_list": [2, 4, 8],
        # null: spec.alpha - 0.05
        "alpha_prime": None,
        "kappa": 0.5,
        "lambda": 0.5,
    },
    "solver": {
        "eta": None,
        "target_N0": 0.05,
        "eps": 2.0 ** -10,
        "a0_star_policy": "mean_of_a",
        "damping": 1.0,
        "tol": 1e-10,
        "max_iters": 200,
        "dealias": False,
        "sigma": "shifted_tanh",
        "renormalize": True,
        "eta_factors": [1.0, 0.5, 0.25, 0.125],
        "eps_list": [2.0 ** -6, 2.0 ** -7, 2.0 ** -8, 2.0 ** -9],
        "g1": 0.1,
        "g2": 0.05,
        "classical_modes": 8,
        "stride": 8,
    },
    "renorm": {
        "eps_list": [2.0 ** -12, 2.0 ** -16, 2.0 ** -20, 2.0 ** -24, 2.0 ** -28],
        "a0": 1.0,
        "a0p": 1.0,
    },
    "output": {"dir": ROUGHPDE_OUT_DIR},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message is pointered (section.key: problem)."""


def _merge(base: Dict[str, Any], update: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in update.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"{path}: unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: must be a mapping")
            out[key] = _merge(base[key], value, prefix=f"{path}.")
        else:
            out[key] = value
    return out


def parse_override(text: str) -> Tuple[List[str], Any]:
    """'solver.eta=0.1' -> (['solver', 'eta'], 0.1); the value is parsed as JSON, else YAML."""
    if "=" not in text:
        raise ConfigError(f"override '{text}': expected key=value")
    key, raw = text.split("=", 1)
    path = [part for part in key.strip().split(".") if part]
    if not path:
        raise ConfigError(f"override '{text}': empty key")
    try:
        return path, json.loads(raw)
    except json.JSONDecodeError:
        pass
    try:
        return path, yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"override '{text}': cannot parse value ({e})")


def apply_overrides(config: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    out = copy.deepcopy(config)
    for text in overrides:
        path, value = parse_override(text)
        node = out
        for i, part in enumerate(path[:-1]):
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"{'.'.join(path[:i + 1])}: unknown section")
            node = node[part]
        if path[-1] not in node:
            raise ConfigError(f"{'.'.join(path)}: unknown key")
        node[path[-1]] = value
    return out


def read_config_file(path) -> Dict[str, Any]:
    """Read a JSON (.json) or YAML (anything else) config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: cannot parse config ({e})")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_positive_list(config: Dict[str, Any], section: str, key: str, upper: Optional[float] = None) -> Tuple[bool, Optional[str]]:
    values = config[section][key]
    if not isinstance(values, list) or not values:
        return False, f"{section}.{key}: must be a non-empty list"
    for value in values:
        if not _is_number(value) or value <= 0 or (upper is not None and value > upper):
            bound = f" in (0, {upper:g}]" if upper is not None else " positive"
            return False, f"{section}.{key}: entries must be numbers{bound}, got {value!r}"
    return True, None


def validate_config(config: Dict[str, Any]) -> Tuple[bool, Optional[str]]:
    """
    Validate a merged config.

    Returns:
        tuple: (bool, str) - (is_valid, error_message)
    """
    for section, entries in config.items():
        for key, value in entries.items():
            if value == REQUIRED:
                return False, f"{section}.{key}: required"

    grid = config["grid"]
    valid, error = validate_sizes(grid["n1"], grid["n2"])
    if not valid:
        return False, f"grid: {error}"

    spec = config["spec"]
    for key in ("lambda1", "lambda2", "alpha"):
        if not _is_number(spec[key]):
            return False, f"spec.{key}: must be a number"
    if spec["form"] not in FORMS:
        return False, f"spec.form: must be one of {', '.join(FORMS)}"
    valid, error = admissible(SimpleNamespace(**{key: spec[key] for key in ("form", "lambda1", "lambda2", "alpha")}))
    if not valid:
        return False, f"spec: {error}"

    seed = config["seeds"]["master"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        return False, "seeds.master: must be an integer in [0, 2^64)"

    plan = config["plan"]
    if not isinstance(plan["n_samples"], int) or plan["n_samples"] < MIN_SAMPLES:
        return False, f"plan.n_samples: must be an integer >= {MIN_SAMPLES}"
    if plan["T_list"] is not None:
        valid, error = _check_positive_list(config, "plan", "T_list", upper=1.0)
        if not valid:
            return False, error
    for key in ("eps_list", "a0_list", "a0p_list"):
        valid, error = _check_positive_list(config, "plan", key)
        if not valid:
            return False, error
    if not isinstance(plan["p_list"], list) or not plan["p_list"] or any(
        not isinstance(p, int) or p < 1 for p in plan["p_list"]
    ):
        return False, "plan.p_list: must be a non-empty list of positive integers"
    if plan["alpha_prime"] is not None and (
        not _is_number(plan["alpha_prime"]) or not 0 < plan["alpha_prime"] < spec["alpha"]
    ):
        return False, f"plan.alpha_prime: must lie in (0, spec.alpha={spec['alpha']})"
    if not _is_number(plan["kappa"]) or not 0 <= plan["kappa"] <= 4:
        return False, "plan.kappa: must lie in [0, 4]"
    if not _is_number(plan["lambda"]) or not 0 < plan["lambda"] <= 1:
        return False, "plan.lambda: must lie in (0, 1]"
    for key in ("a0_list", "a0p_list"):
        if any(not plan["lambda"] <= a0 <= 1.0 for a0 in plan[key]):
            return False, f"plan.{key}: entries must lie in [plan.lambda, 1]"

    solver = config["solver"]
    if solver["eta"] is not None and (not _is_number(solver["eta"]) or solver["eta"] < 0):
        return False, "solver.eta: must be a non-negative number or null"
    if not _is_number(solver["target_N0"]) or solver["target_N0"] <= 0:
        return False, "solver.target_N0: must be positive"
    if not _is_number(solver["eps"]) or solver["eps"] <= 0:
        return False, "solver.eps: must be positive"
    if solver["a0_star_policy"] not in A0_POLICIES:
        return False, f"solver.a0_star_policy: must be one of {', '.join(A0_POLICIES)}"
    if solver["sigma"] not in SIGMA_KINDS:
        return False, f"solver.sigma: must be one of {', '.join(SIGMA_KINDS)}"
    if not _is_number(solver["damping"]) or not 0 < solver["damping"] <= 1:
        return False, "solver.damping: must lie in (0, 1]"
    if not _is_number(solver["tol"]) or solver["tol"] <= 0:
        return False, "solver.tol: must be positive"
    if not isinstance(solver["max_iters"], int) or solver["max_iters"] < 1:
        return False, "solver.max_iters: must be a positive integer"
    for key in ("dealias", "renormalize"):
        if not isinstance(solver[key], bool):
            return False, f"solver.{key}: must be true or false"
    for key in ("eta_factors", "eps_list"):
        valid, error = _check_positive_list(config, "solver", key)
        if not valid:
            return False, error
    for key in ("g1", "g2"):
        if not _is_number(solver[key]):
            return False, f"solver.{key}: must be a number"
    for key in ("classical_modes", "stride"):
        if not isinstance(solver[key], int) or solver[key] < 1:
            return False, f"solver.{key}: must be a positive integer"

    renorm = config["renorm"]
    valid, error = _check_positive_list(config, "renorm", "eps_list")
    if not valid:
        return False, error
    for key in ("a0", "a0p"):
        if not _is_number(renorm[key]) or renorm[key] <= 0:
            return False, f"renorm.{key}: must be positive"

    if not isinstance(config["output"]["dir"], str) or not config["output"]["dir"]:
        return False, "output.dir: must be a non-empty path"
    return True, None


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration with its typed views."""

    data: Dict[str, Any]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.data["grid"]["n1"], self.data["grid"]["n2"])

    @property
    def spec(self) -> CovarianceSpec:
        return CovarianceSpec.from_dict(self.data["spec"])

    @property
    def seed(self) -> SeedSpec:
        return SeedSpec(self.data["seeds"]["master"])

    @property
    def plan(self) -> Dict[str, Any]:
        return self.data["plan"]

    @property
    def solver(self) -> Dict[str, Any]:
        return self.data["solver"]

    @property
    def renorm(self) -> Dict[str, Any]:
        return self.data["renorm"]

    @property
    def out_dir(self) -> Path:
        return Path(self.data["output"]["dir"])

    @property
    def alpha_prime(self) -> float:
        value = self.plan["alpha_prime"]
        alpha = float(self.data["spec"]["alpha"])
        return float(value) if value is not None else max(alpha - 0.05, alpha / 2.0)

    @property
    def T_list(self) -> List[float]:
        if self.plan["T_list"] is not None:
            return [float(T) for T in self.plan["T_list"]]
        return dyadic_scales(self.grid)


def build_config(data: Optional[Dict[str, Any]] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Merge user data and overrides onto the defaults and validate.

    Raises:
        ConfigError: with a pointered message such as "spec.alpha: required"
    """
    merged = _merge(DEFAULT_CONFIG, data or {})
    merged = apply_overrides(merged, overrides)
    valid, error = validate_config(merged)
    if not valid:
        raise ConfigError(error)
    return RunConfig(merged)


def load_config(path=None, overrides: Iterable[str] = ()) -> RunConfig:
    data = read_config_file(path) if path else {}
    return build_config(data, overrides)

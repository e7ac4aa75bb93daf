#!/usr/bin/env python3
"""
Tests for roughpde.config

Covers:
- Defaults and required keys
- JSON/YAML loading
- Dotted overrides
- Pointered validation errors
"""

import json

import pytest

from roughpde.config import (
    DEFAULT_CONFIG,
    ConfigError,
    apply_overrides,
    build_config,
    load_config,
    parse_override,
    read_config_file,
)
from roughpde.grid import GridSpec

SPEC = {"spec": {"lambda1": 0.4, "alpha": 0.7}}


def config_with(**sections):
    data = {"spec": dict(SPEC["spec"])}
    for section, entries in sections.items():
        data.setdefault(section, {}).update(entries)
    return data


# ============================================================================
# Defaults
# ============================================================================

class TestDefaults:
    """Test the documented defaults."""

    def test_minimal_config(self):
        """A spec with lambda1 and alpha is a complete config."""
        config = build_config(SPEC)
        assert config.grid == GridSpec(128, 128)
        assert config.spec.lambda2 == 0.0
        assert config.seed.master_seed == 0
        assert config.plan["n_samples"] == 256

    def test_required_keys(self):
        """spec.alpha is required."""
        with pytest.raises(ConfigError, match="spec.alpha: required"):
            build_config({"spec": {"lambda1": 0.4}})

    def test_alpha_prime_default(self):
        """alpha' defaults to alpha - 0.05."""
        assert build_config(SPEC).alpha_prime == pytest.approx(0.65)

    def test_t_list_default(self):
        """T_list defaults to the resolvable dyadic scales."""
        config = build_config(config_with(grid={"n1": 32, "n2": 32}))
        assert config.T_list[0] == 1.0
        assert config.T_list[-1] == pytest.approx(2.0 ** -6)

    def test_defaults_not_mutated(self):
        """Building configs leaves DEFAULT_CONFIG untouched."""
        build_config(config_with(grid={"n1": 16}))
        assert DEFAULT_CONFIG["grid"]["n1"] == 128


# ============================================================================
# Files and overrides
# ============================================================================

class TestLoading:
    """Test config files and overrides."""

    def test_json_file(self, tmp_path):
        """JSON configs are read by suffix."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps(config_with(seeds={"master": 9})))
        assert load_config(path).seed.master_seed == 9

    def test_yaml_file(self, tmp_path):
        """Other suffixes are read as YAML."""
        path = tmp_path / "run.yaml"
        path.write_text("spec:\n  lambda1: 0.4\n  alpha: 0.7\ngrid:\n  n1: 64\n  n2: 32\n")
        assert load_config(path).grid == GridSpec(64, 32)

    def test_missing_file(self, tmp_path):
        """A missing file is a ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            read_config_file(tmp_path / "nope.json")

    def test_unparsable_file(self, tmp_path):
        """Broken JSON is a ConfigError."""
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="cannot parse"):
            read_config_file(path)

    def test_top_level_mapping(self, tmp_path):
        """The top level must be a mapping."""
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            read_config_file(path)

    def test_parse_override(self):
        """Values are parsed as JSON, then YAML."""
        assert parse_override("solver.tol=1e-12") == (["solver", "tol"], 1e-12)
        assert parse_override("solver.dealias=true") == (["solver", "dealias"], True)
        assert parse_override("solver.a0_star_policy=max_of_a")[1] == "max_of_a"
        assert parse_override("plan.a0_list=[0.5, 1.0]")[1] == [0.5, 1.0]

    def test_override_applied_last(self):
        """Overrides win over file values."""
        config = build_config(config_with(seeds={"master": 1}), ["seeds.master=5"])
        assert config.seed.master_seed == 5

    def test_override_unknown_key(self):
        """Overrides cannot invent keys."""
        with pytest.raises(ConfigError, match="solver.speed: unknown key"):
            apply_overrides(DEFAULT_CONFIG, ["solver.speed=2"])
        with pytest.raises(ConfigError, match="expected key=value"):
            apply_overrides(DEFAULT_CONFIG, ["solver.tol"])


# ============================================================================
# Validation
# ============================================================================

class TestValidation:
    """Test pointered validation errors."""

    @pytest.mark.parametrize(
        "sections,pointer",
        [
            ({"grid": {"n1": 15}}, "grid:"),
            ({"spec": {"lambda1": 0.0}}, "spec:"),
            ({"seeds": {"master": -1}}, "seeds.master"),
            ({"plan": {"n_samples": 8}}, "plan.n_samples"),
            ({"plan": {"alpha_prime": 0.8}}, "plan.alpha_prime"),
            ({"plan": {"a0_list": [0.2, 1.0]}}, "plan.a0_list"),
            ({"plan": {"T_list": [2.0]}}, "plan.T_list"),
            ({"solver": {"damping": 0.0}}, "solver.damping"),
            ({"solver": {"sigma": "cubic"}}, "solver.sigma"),
            ({"solver": {"dealias": "yes"}}, "solver.dealias"),
            ({"solver": {"classical_modes": 0}}, "solver.classical_modes"),
            ({"renorm": {"eps_list": []}}, "renorm.eps_list"),
        ],
    )
    def test_invalid_entries(self, sections, pointer):
        """Each invalid entry is reported with its section.key pointer."""
        with pytest.raises(ConfigError) as excinfo:
            build_config(config_with(**sections))
        assert str(excinfo.value).startswith(pointer)

    def test_unknown_section(self):
        """Unknown top-level sections are rejected."""
        with pytest.raises(ConfigError, match="extras: unknown key"):
            build_config({**SPEC, "extras": {}})

    def test_section_must_be_mapping(self):
        """A scalar where a section belongs is rejected."""
        with pytest.raises(ConfigError, match="grid: must be a mapping"):
            build_config({**SPEC, "grid": 64})

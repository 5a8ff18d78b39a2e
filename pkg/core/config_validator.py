"""
Configuration validator module.

This module validates run configurations (RunConfig dictionaries) against a
JSON schema per subcommand and then checks the cross-field rules a schema
cannot express.
"""

import math
import re
from typing import Any, Dict, Union

import jsonschema
import numpy as np

from .constants import SUPPORTED_FORMATS, SUPPORTED_MODELS, UNIFORM_PHASE_CONVENTIONS
from .exceptions import ConfigurationError

COMMANDS = ("fisher-curve", "dmin", "audit-matrix", "mle-verify", "calibrate-mu")

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
GRID_PATTERN = rf"^{_NUMBER}:{_NUMBER}:\d+:(log|lin)$"

PROPERTIES = {
    "command": {"enum": list(COMMANDS)},
    "seed": {"type": "integer", "minimum": 0},
    "threads": {"type": "integer", "minimum": 1},
    "out": {"type": "string", "minLength": 1},
    "format": {"enum": sorted(SUPPORTED_FORMATS)},
    "log_file": {"type": "string"},
    "cache_file": {"type": "string"},
    "model": {"enum": sorted(SUPPORTED_MODELS)},
    "dim": {"type": "integer", "minimum": 1},
    "q_measured": {"type": "integer", "minimum": 0},
    "r2": {"type": "number", "exclusiveMinimum": 0},
    "r2_grid": {"type": "string", "pattern": GRID_PATTERN},
    "convention": {"enum": sorted(UNIFORM_PHASE_CONVENTIONS)},
    "mu": {"type": "number", "minimum": 0},
    "target_offdiag": {"type": "number", "minimum": 0},
    "theta": {"type": "number"},
    "samples": {"type": "integer", "minimum": 1},
    "matrix": {"type": "string", "minLength": 1},
    "x_grid": {"type": "string", "pattern": GRID_PATTERN},
    "n_photons": {
        "oneOf": [
            {"type": "number", "exclusiveMinimum": 0},
            {"type": "string", "pattern": GRID_PATTERN},
        ]
    },
    "direct_imaging": {"type": "boolean"},
    "trials": {"type": "integer", "minimum": 2},
    "x_true": {"type": "number", "exclusiveMinimum": 0},
    "per_trial": {"type": ["string", "null"]},
    "false_resolution": {"type": "boolean"},
}

REQUIRED = {
    "fisher-curve": ["model", "x_grid", "q_measured", "theta"],
    "dmin": ["model", "n_photons", "q_measured", "theta"],
    "audit-matrix": ["matrix", "q_measured", "theta", "n_photons"],
    "mle-verify": ["model", "x_true", "n_photons", "trials", "q_measured", "theta"],
    "calibrate-mu": ["dim", "target_offdiag", "samples"],
}


def schema_for(command: str) -> Dict[str, Any]:
    """Draft-7 schema of the RunConfig of one subcommand."""
    return {
        "$schema": "http://json-schema.org/draft-07/schema#",
        "type": "object",
        "properties": PROPERTIES,
        "required": ["command", "seed"] + REQUIRED[command],
    }


def parse_grid(spec: str) -> np.ndarray:
    """
    Parse a grid specification 'min:max:steps:log|lin'.

    Raises:
        ConfigurationError: If the specification is malformed or empty
    """
    if not isinstance(spec, str) or not re.match(GRID_PATTERN, spec.strip()):
        raise ConfigurationError(f"grid '{spec}' must look like min:max:steps:log|lin")
    lo_text, hi_text, steps_text, kind = spec.strip().split(":")
    lo, hi, steps = float(lo_text), float(hi_text), int(steps_text)
    if steps < 1:
        raise ConfigurationError(f"grid '{spec}' needs at least one step")
    if steps == 1:
        return np.array([lo])
    if not lo < hi:
        raise ConfigurationError(f"grid '{spec}' needs min < max")
    if kind == "log":
        if lo <= 0:
            raise ConfigurationError(f"log grid '{spec}' needs min > 0")
        return np.geomspace(lo, hi, steps)
    return np.linspace(lo, hi, steps)


def parse_photon_numbers(value: Union[float, int, str]) -> np.ndarray:
    """A single photon number or a grid specification, as an array."""
    if isinstance(value, str):
        try:
            return np.array([float(value)])
        except ValueError:
            return parse_grid(value)
    return np.array([float(value)])


class ConfigValidator:
    """Validates run configurations."""

    @staticmethod
    def validate(config: Dict[str, Any]) -> None:
        """
        Validate a run configuration.

        Args:
            config: The configuration dictionary to validate

        Raises:
            ConfigurationError: If any validation check fails
        """
        if not isinstance(config, dict):
            raise ConfigurationError("Configuration must be a dictionary")
        command = config.get("command")
        if command not in COMMANDS:
            raise ConfigurationError(
                f"Unsupported command '{command}'. Supported commands are: {', '.join(COMMANDS)}"
            )

        validator = jsonschema.Draft7Validator(schema_for(command))
        errors = sorted(validator.iter_errors(config), key=lambda e: list(e.path))
        if errors:
            first = errors[0]
            where = ".".join(str(p) for p in first.path) or "config"
            raise ConfigurationError(f"Invalid value for '{where}': {first.message}")

        for key in ("x_grid", "r2_grid"):
            if key in config:
                parse_grid(config[key])
        if "n_photons" in config:
            photons = parse_photon_numbers(config["n_photons"])
            if np.any(photons <= 0):
                raise ConfigurationError("photon numbers must be positive")
            if command == "mle-verify" and photons.size != 1:
                raise ConfigurationError("mle-verify needs a single photon number")

        if command == "calibrate-mu":
            ConfigValidator._check_dimension(config["dim"], 0)
            return
        if command == "audit-matrix":
            return
        ConfigValidator._check_model(config)

    @staticmethod
    def _check_dimension(dim: int, q_measured: int) -> None:
        side = math.isqrt(dim)
        if side * side != dim:
            raise ConfigurationError(f"'dim' must be a perfect square (D = (Q+1)^2), got {dim}")
        if q_measured > side - 1:
            raise ConfigurationError(
                f"q_measured={q_measured} exceeds the crosstalk cutoff {side - 1} of D={dim}"
            )

    @staticmethod
    def _check_model(config: Dict[str, Any]) -> None:
        model = config["model"]
        command = config["command"]
        q_measured = config["q_measured"]

        if model == "uniform":
            for key in ("dim", "r2"):
                if key not in config:
                    raise ConfigurationError(f"model 'uniform' requires '{key}'")
            ConfigValidator._check_dimension(config["dim"], q_measured)
            if (config["dim"] - 1) * config["r2"] >= 1:
                raise ConfigurationError(f"r2={config['r2']} too large for D={config['dim']}: (D-1) r2 must be < 1")
        elif model == "random":
            if command == "mle-verify":
                raise ConfigurationError("mle-verify needs a single measurement model, not a random ensemble")
            for key in ("dim", "samples"):
                if key not in config:
                    raise ConfigurationError(f"model 'random' requires '{key}'")
            ConfigValidator._check_dimension(config["dim"], q_measured)
            if ("mu" in config) == ("target_offdiag" in config):
                raise ConfigurationError("model 'random' requires exactly one of 'mu' and 'target_offdiag'")
            if "target_offdiag" in config and config["target_offdiag"] >= 1.0 / (config["dim"] - 1):
                raise ConfigurationError("'target_offdiag' must be below 1/(D-1)")
        elif model == "file":
            if "matrix" not in config:
                raise ConfigurationError("model 'file' requires 'matrix'")

        if "r2_grid" in config:
            if command != "dmin" or model != "uniform":
                raise ConfigurationError("'r2_grid' is only supported by dmin with model 'uniform'")
            r2_values = parse_grid(config["r2_grid"])
            if np.any(r2_values <= 0) or np.any((config["dim"] - 1) * r2_values >= 1):
                raise ConfigurationError(f"every r2 in '{config['r2_grid']}' must satisfy 0 < (D-1) r2 < 1")

"""
Main entry point for demuxlimit.

This script loads the .env file, parses command-line arguments, merges them
with the defaults file into a run configuration and runs the subcommand.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from dotenv import load_dotenv

from . import __version__
from .core.commands import CommandRunner
from .core.constants import (
    DEFAULT_CONFIG_FILE,
    DEFAULT_DIM,
    DEFAULT_LOG_FILE,
    DEFAULT_Q_MEASURED,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_X_GRID,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    LOG_LEVEL_ENV_VAR,
    SEED_ENV_VAR,
    SUPPORTED_FORMATS,
    SUPPORTED_MODELS,
    THREADS_ENV_VAR,
    UNIFORM_PHASE_CONVENTIONS,
)
from .core.exceptions import ConfigurationError, exit_code_for
from .core.logging import parse_level, setup_logging

# argparse destination -> RunConfig key
FLAG_KEYS = {
    "seed": "seed",
    "out": "out",
    "format": "format",
    "threads": "threads",
    "model": "model",
    "dim": "dim",
    "q_measured": "q_measured",
    "r2": "r2",
    "r2_grid": "r2_grid",
    "convention": "convention",
    "target_offdiag": "target_offdiag",
    "mu": "mu",
    "theta": "theta",
    "samples": "samples",
    "x_grid": "x_grid",
    "n_photons": "n_photons",
    "matrix": "matrix",
    "direct_imaging": "direct_imaging",
    "trials": "trials",
    "x_true": "x_true",
    "per_trial": "per_trial",
    "false_resolution": "false_resolution",
}


def parse_threads(value: str) -> int:
    """'auto' or a positive integer."""
    if value == "auto":
        return os.cpu_count() or 1
    try:
        threads = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--threads expects a positive integer or 'auto', got '{value}'")
    if threads < 1:
        raise argparse.ArgumentTypeError("--threads must be at least 1")
    return threads


def parse_photons(value: str):
    """A photon number or a grid 'min:max:steps:log|lin'."""
    try:
        return float(value)
    except ValueError:
        return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", default=None,
                        help=f"Defaults file (default: {DEFAULT_CONFIG_FILE} if present)")
    common.add_argument("-l", "--log", default=None, help=f"Path to the log file (default: {DEFAULT_LOG_FILE})")
    common.add_argument("--log-level", default=None, help="Logging level (default: INFO)")
    common.add_argument("--seed", type=int, default=None, help="Master seed")
    common.add_argument("--out", default=None, help="Output path, '-' for stdout")
    common.add_argument("--format", choices=sorted(SUPPORTED_FORMATS), default=None)
    common.add_argument("--threads", type=parse_threads, default=None, help="Worker threads or 'auto'")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", choices=sorted(SUPPORTED_MODELS), default=None)
    model.add_argument("--dim", type=int, default=None, help="Crosstalk dimension D")
    model.add_argument("--q-measured", dest="q_measured", type=int, default=None)
    model.add_argument("--r2", type=float, default=None, help="Uniform crosstalk probability |r|^2")
    model.add_argument("--convention", choices=sorted(UNIFORM_PHASE_CONVENTIONS), default=None,
                       help="Phase convention of the uniform matrix")
    model.add_argument("--target-offdiag", dest="target_offdiag", type=float, default=None,
                       help="Target ensemble-mean |c_ij|^2 of the random model")
    model.add_argument("--mu", type=float, default=None, help="Coupling strength of the random model")
    model.add_argument("--theta", type=float, default=None, help="Tilt angle in radians")
    model.add_argument("--samples", type=int, default=None, help="Random ensemble size")
    model.add_argument("--matrix", default=None, help="Crosstalk matrix file for --model file")

    parser = argparse.ArgumentParser(
        prog="demuxlimit",
        description="Resolution limits of spatial-mode demultiplexing under crosstalk",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    curve = commands.add_parser("fisher-curve", parents=[common, model], help="Fisher information against x")
    curve.add_argument("--x-grid", dest="x_grid", default=None, help="min:max:steps:log|lin")
    curve.add_argument("--direct-imaging", dest="direct_imaging", action="store_true", default=None,
                       help="Add the direct-imaging column")

    dmin = commands.add_parser("dmin", parents=[common, model], help="Minimal resolvable distance")
    dmin.add_argument("--n-photons", dest="n_photons", type=parse_photons, default=None)
    dmin.add_argument("--r2-grid", dest="r2_grid", default=None, help="Sweep |r|^2 over min:max:steps:log|lin")
    dmin.add_argument("--direct-imaging", dest="direct_imaging", action="store_true", default=None)

    audit = commands.add_parser("audit-matrix", parents=[common], help="Characterize a crosstalk matrix file")
    audit.add_argument("matrix", help="Matrix file")
    audit.add_argument("--q-measured", dest="q_measured", type=int, default=None)
    audit.add_argument("--theta", type=float, default=None)
    audit.add_argument("--n-photons", dest="n_photons", type=parse_photons, default=None)

    mle = commands.add_parser("mle-verify", parents=[common, model], help="Monte Carlo Cramér-Rao check")
    mle.add_argument("--n-photons", dest="n_photons", type=parse_photons, default=None)
    mle.add_argument("--x-true", dest="x_true", type=float, default=None, help="True d/2w")
    mle.add_argument("--trials", type=int, default=None)
    mle.add_argument("--per-trial", dest="per_trial", default=None, help="Per-trial CSV path")
    mle.add_argument("--no-false-resolution", dest="false_resolution", action="store_false", default=None,
                     help="Skip the d = 0 datasets")

    calibrate = commands.add_parser("calibrate-mu", parents=[common], help="Calibrate the random coupling strength")
    calibrate.add_argument("--dim", type=int, default=None)
    calibrate.add_argument("--target-offdiag", dest="target_offdiag", type=float, default=None)
    calibrate.add_argument("--samples", type=int, default=None)
    return parser


def load_defaults(path: Optional[str]) -> Dict[str, Any]:
    """
    Read the defaults file.

    A missing default file gives no defaults; a missing explicit file is an error.

    Raises:
        ConfigurationError: If the file cannot be read or is not a JSON object
    """
    explicit = path is not None
    config_path = Path(path or DEFAULT_CONFIG_FILE)
    if not config_path.exists():
        if explicit:
            raise ConfigurationError(f"Configuration file not found: {config_path}")
        return {}
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            defaults = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Error reading configuration file: {e}") from e
    if not isinstance(defaults, dict):
        raise ConfigurationError("Configuration file must contain a JSON object")
    return defaults


def build_config(args: argparse.Namespace, defaults: Mapping[str, Any],
                 environ: Mapping[str, str]) -> Dict[str, Any]:
    """
    Merge built-in defaults, the defaults file, environment variables and flags.

    Later sources win; flags that were not given leave earlier values untouched.
    """
    config: Dict[str, Any] = {
        "seed": DEFAULT_SEED,
        "threads": 1,
        "format": "csv",
        "out": "-",
        "model": "ideal",
        "q_measured": DEFAULT_Q_MEASURED,
        "theta": 0.0,
        "dim": DEFAULT_DIM,
        "samples": DEFAULT_SAMPLES,
        "x_grid": DEFAULT_X_GRID,
    }
    config.update(defaults)
    try:
        if SEED_ENV_VAR in environ:
            config["seed"] = int(environ[SEED_ENV_VAR])
        if THREADS_ENV_VAR in environ:
            config["threads"] = parse_threads(environ[THREADS_ENV_VAR])
    except (ValueError, argparse.ArgumentTypeError) as e:
        raise ConfigurationError(f"Invalid environment setting: {e}") from e
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            config[key] = value
    config["command"] = args.command
    if config["command"] == "audit-matrix":
        config.pop("model", None)
    return config


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main function to run demuxlimit.

    Returns:
        The process exit code: 0 on success, 2 for configuration errors and
        3 for numerical failures
    """
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        level_name = args.log_level or os.getenv(LOG_LEVEL_ENV_VAR, "INFO")
        level = parse_level(level_name)
    except ValueError as e:
        parser.print_usage(sys.stderr)
        print(f"demuxlimit: error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        defaults = load_defaults(args.config)
        setup_logging(args.log or defaults.get("log_file", DEFAULT_LOG_FILE), level)
        config = build_config(args, defaults, os.environ)
        CommandRunner().run(config)
    except Exception as e:
        code = exit_code_for(e)
        if code == EXIT_CONFIG_ERROR:
            parser.print_usage(sys.stderr)
        logging.error(f"demuxlimit {args.command} failed: {e}")
        return code

    logging.info(f"{args.command} completed successfully")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""
Tests for the command-line entry point.

This module contains unit tests for argument parsing, the merging of
defaults, environment and flags, and the exit codes of main().
"""

import json
from unittest.mock import patch

import pytest

from .. import main as main_module
from ..core.commands import CommandRunner
from ..core.exceptions import ConfigurationError, RootNotFoundError


@pytest.fixture
def no_logging_setup():
    """Keep main() from installing log handlers during tests."""
    with patch.object(main_module, "setup_logging") as mock_setup:
        yield mock_setup


class TestParser:
    """Test cases for build_parser and the flag converters."""

    def test_dmin_flags(self):
        """Test parsing the dmin subcommand."""
        args = main_module.build_parser().parse_args(
            ["dmin", "--model", "uniform", "--r2", "0.0017", "--n-photons", "1:1e8:9:log", "--threads", "2"]
        )
        assert args.command == "dmin"
        assert args.r2 == 0.0017
        assert args.n_photons == "1:1e8:9:log"
        assert args.threads == 2

    def test_audit_positional_matrix(self):
        """Test that audit-matrix takes the matrix path as an argument."""
        args = main_module.build_parser().parse_args(["audit-matrix", "c.txt", "--n-photons", "1e4"])
        assert args.matrix == "c.txt"
        assert args.n_photons == 1e4

    def test_threads_auto(self):
        """Test that 'auto' selects the CPU count."""
        with patch("os.cpu_count", return_value=6):
            assert main_module.parse_threads("auto") == 6

    @pytest.mark.parametrize("value", ["0", "many"])
    def test_threads_invalid(self, value):
        """Test rejected thread counts."""
        with pytest.raises(Exception):
            main_module.parse_threads(value)

    def test_unknown_subcommand(self):
        """Test that argparse rejects unknown subcommands with exit code 2."""
        with pytest.raises(SystemExit) as exc_info:
            main_module.build_parser().parse_args(["plot"])
        assert exc_info.value.code == 2


class TestBuildConfig:
    """Test cases for load_defaults and build_config."""

    def test_precedence(self):
        """Test that flags beat the environment, which beats the defaults file."""
        args = main_module.build_parser().parse_args(["fisher-curve", "--theta", "0.5"])
        defaults = {"seed": 3, "threads": 2, "theta": 0.1, "model": "uniform", "r2": 0.001}
        config = main_module.build_config(args, defaults, {"DEMUXLIMIT_SEED": "9"})
        assert config["seed"] == 9
        assert config["threads"] == 2
        assert config["theta"] == 0.5
        assert config["model"] == "uniform"
        assert config["command"] == "fisher-curve"
        assert config["x_grid"] == "1e-4:2.5:200:log"

    def test_bad_environment(self):
        """Test that malformed environment settings are configuration errors."""
        args = main_module.build_parser().parse_args(["fisher-curve"])
        with pytest.raises(ConfigurationError, match="environment"):
            main_module.build_config(args, {}, {"DEMUXLIMIT_THREADS": "zero"})

    def test_audit_drops_model(self):
        """Test that audit-matrix does not inherit a model from the defaults."""
        args = main_module.build_parser().parse_args(["audit-matrix", "c.txt"])
        config = main_module.build_config(args, {"model": "ideal"}, {})
        assert "model" not in config
        assert config["matrix"] == "c.txt"

    def test_missing_default_file(self, tmp_cwd):
        """Test that a missing implicit defaults file gives no defaults."""
        assert main_module.load_defaults(None) == {}

    def test_missing_explicit_file(self, tmp_cwd):
        """Test that a missing explicit defaults file is an error."""
        with pytest.raises(ConfigurationError, match="not found"):
            main_module.load_defaults("nowhere.json")

    def test_defaults_not_object(self, tmp_cwd):
        """Test that the defaults file must hold a JSON object."""
        (tmp_cwd / "config.json").write_text("[1, 2]")
        with pytest.raises(ConfigurationError, match="JSON object"):
            main_module.load_defaults(None)


class TestMain:
    """Test cases for main()."""

    def test_success(self, tmp_cwd, no_logging_setup):
        """Test a full fisher-curve run."""
        code = main_module.main(["fisher-curve", "--x-grid", "0.1:1:3:lin", "--out", "curve.csv"])
        assert code == 0
        assert (tmp_cwd / "curve.csv").read_text().startswith("# demuxlimit ")
        no_logging_setup.assert_called_once()

    def test_config_file(self, tmp_cwd, no_logging_setup):
        """Test that the defaults file feeds the run configuration."""
        (tmp_cwd / "run.json").write_text(json.dumps({"x_grid": "0.2:0.4:2:lin", "format": "json"}))
        code = main_module.main(["fisher-curve", "-c", "run.json", "--out", "curve.json"])
        assert code == 0
        document = json.loads((tmp_cwd / "curve.json").read_text())
        assert len(document["data"]) == 2

    def test_configuration_error(self, tmp_cwd, no_logging_setup, capsys):
        """Test exit code 2 and the usage line for invalid configurations."""
        code = main_module.main(["dmin", "--model", "uniform", "--n-photons", "1e4"])
        assert code == 2
        assert "usage:" in capsys.readouterr().err

    def test_numerical_error(self, tmp_cwd, no_logging_setup):
        """Test exit code 3 for numerical failures."""
        with patch.object(CommandRunner, "run", side_effect=RootNotFoundError("no root")):
            assert main_module.main(["dmin", "--n-photons", "1e4"]) == 3

    def test_bad_log_level(self, tmp_cwd, capsys):
        """Test that an unknown log level is a configuration error."""
        assert main_module.main(["dmin", "--log-level", "chatty"]) == 2
        assert "Unknown log level" in capsys.readouterr().err

"""
Command runner module.

This module implements the subcommands of the command-line tool. Each command
takes a validated run configuration, computes its table or report, and writes
it through the ReportFormatter with the configuration embedded.
"""

import concurrent.futures
import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .. import __version__
from ..measurements.crosstalk_demux import CrosstalkDemux
from ..measurements.direct_imaging import DirectImaging
from ..measurements.interface import IMeasurementModel
from ..physics.crosstalk import crosstalk_stats, ensemble_stats, load_matrix, mu_scan
from ..physics.fisher import fisher_uniform_smalld, generic_smalld_from_matrix
from ..physics.modes import SceneParams
from ..physics.montecarlo import crb_experiment
from ..physics.resolution import (
    ResolutionResult,
    crossover_photon_number,
    crossover_ratio,
    dmin_direct_imaging,
    dmin_from_smalld_coefficient,
    dmin_ideal,
    dmin_sweep,
    dmin_uniform,
    local_slopes,
    minimal_resolvable_distance,
    scaling_exponent,
)
from .cache import CalibrationCache
from .config_validator import ConfigValidator, parse_grid, parse_photon_numbers
from .constants import DEFAULT_CACHE_FILE, MIN_FIT_DECADES, MIN_FIT_POINTS
from .exceptions import ConfigurationError, DomainError
from .factory import MeasurementFactory
from .report_formatter import ReportFormatter

FISHER_COLUMNS = ["x", "theta", "q_measured", "mean_w2F", "std_w2F", "n_samples", "model"]
DMIN_COLUMNS = ["N", "r2", "dmin_over_2w", "dmin_analytic", "status", "model"]


class EnsembleCurve:
    """Mean Fisher information over one or more measurement models."""

    def __init__(self, models: Sequence[IMeasurementModel]):
        if not models:
            raise ConfigurationError("no measurement models to evaluate")
        self.models = list(models)

    def values(self, x: float) -> np.ndarray:
        return np.array([m.fisher(x).w2F for m in self.models])

    def __call__(self, x: float) -> float:
        return float(self.values(x).mean())


class CommandRunner:
    """Facade that runs one subcommand from a run configuration."""

    def __init__(self, cache: Optional[CalibrationCache] = None):
        """
        Initialize the runner.

        Args:
            cache: Calibration cache shared by the commands; created on first use if None
        """
        self.logger = logging.getLogger("commands")
        self.formatter = ReportFormatter(__version__)
        self._cache = cache

    def cache_for(self, config: Dict[str, Any]) -> CalibrationCache:
        if self._cache is None:
            self._cache = CalibrationCache(config.get("cache_file", DEFAULT_CACHE_FILE))
        return self._cache

    def run(self, config: Dict[str, Any]) -> str:
        """
        Validate the configuration, run its command and write the output.

        Args:
            config: The run configuration

        Returns:
            The text written to the output

        Raises:
            ConfigurationError: If the configuration is invalid
            NumericalError: If a numerical procedure fails
        """
        ConfigValidator.validate(config)
        handlers: Dict[str, Callable[[Dict[str, Any]], str]] = {
            "fisher-curve": self.cmd_fisher_curve,
            "dmin": self.cmd_dmin,
            "audit-matrix": self.cmd_audit_matrix,
            "mle-verify": self.cmd_mle_verify,
            "calibrate-mu": self.cmd_calibrate_mu,
        }
        self.logger.info(f"Running {config['command']} (seed {config['seed']})")
        content = handlers[config["command"]](config)
        self.formatter.write_to_report(config.get("out", "-"), content)
        return content

    def _map(self, func, items, threads: int) -> List[Any]:
        """Evaluate func over items in parallel, results ordered by item index."""
        if threads <= 1:
            return [func(item) for item in items]
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(func, items))

    def _model_summary(self, config: Dict[str, Any], models: Sequence[IMeasurementModel]) -> Dict[str, Any]:
        if config["model"] == "random":
            return {
                "model": "random",
                "dim": config["dim"],
                "mu": models[0].matrix.provenance.details["mu"],
                "samples": len(models),
                "q_measured": config["q_measured"],
                "theta": config["theta"],
            }
        return models[0].descriptor()

    def _smalld_reference(self, config: Dict[str, Any], models: Sequence[IMeasurementModel]):
        """Analytic small-x Fisher information as a function of x, where one applies."""
        model, theta, q = config["model"], config["theta"], config["q_measured"]
        if model == "uniform":
            dim, r2 = config["dim"], config["r2"]
            t = math.sqrt(1.0 - (dim - 1) * r2)
            return lambda x: fisher_uniform_smalld(dim, math.sqrt(r2), t, theta, x, q, "full").w2F
        if model == "random":
            dim = config["dim"]
            r2 = ensemble_stats([m.matrix for m in models])["mean_avg_offdiag"]
            if r2 == 0:
                return None
            return lambda x: fisher_uniform_smalld(
                dim, math.sqrt(r2), math.sqrt(1.0 - (dim - 1) * r2), theta, x, q, "weak"
            ).w2F
        return None

    def cmd_fisher_curve(self, config: Dict[str, Any]) -> str:
        """
        Fisher information against x for one model or a random ensemble.

        Columns: x, theta, q_measured, mean_w2F, std_w2F, n_samples, model, plus
        smalld_w2F for crosstalk models, the d√F band for ensembles and
        direct_imaging_w2F on request.
        """
        xs = parse_grid(config["x_grid"])
        threads = config.get("threads", 1)
        models = MeasurementFactory.create_models(config, self.cache_for(config))
        curve = EnsembleCurve(models)
        summary = self._model_summary(config, models)
        reference = self._smalld_reference(config, models)
        direct = MeasurementFactory.create_direct_imaging(config) if config.get("direct_imaging") else None

        def evaluate(x: float) -> Dict[str, Any]:
            values = curve.values(x)
            spread = len(values) > 1
            sensitivity = 2.0 * max(x, 0.0) * np.sqrt(values)
            row = {
                "x": x,
                "theta": config["theta"],
                "q_measured": config["q_measured"],
                "mean_w2F": float(values.mean()),
                "std_w2F": float(values.std(ddof=1)) if spread else 0.0,
                "n_samples": len(values),
                "model": summary,
                "mean_dsqrtF": float(sensitivity.mean()),
                "std_dsqrtF": float(sensitivity.std(ddof=1)) if spread else 0.0,
            }
            if reference is not None:
                row["smalld_w2F"] = reference(x)
            if direct is not None:
                row["direct_imaging_w2F"] = direct.fisher(x).w2F
            return row

        self.logger.info(f"Evaluating {len(models)} model(s) on {len(xs)} grid points")
        rows = self._map(evaluate, [float(x) for x in xs], threads)
        columns = list(FISHER_COLUMNS)
        if len(models) > 1:
            columns += ["mean_dsqrtF", "std_dsqrtF"]
        if reference is not None:
            columns.append("smalld_w2F")
        if direct is not None:
            columns.append("direct_imaging_w2F")
        return self.formatter.format_table(columns, rows, config, config.get("format", "csv"))

    def _analytic_dmin(self, config: Dict[str, Any], models: Sequence[IMeasurementModel],
                       n_photons: float) -> Optional[ResolutionResult]:
        model, theta = config["model"], config["theta"]
        if model == "ideal":
            return dmin_ideal(n_photons)
        if model == "uniform":
            dim, r2 = config["dim"], config["r2"]
            return dmin_uniform(n_photons, math.sqrt(r2), (dim - 1) * r2, theta)
        if model == "random":
            r2 = ensemble_stats([m.matrix for m in models])["mean_avg_offdiag"]
            if r2 == 0:
                return dmin_ideal(n_photons)
            return dmin_uniform(n_photons, math.sqrt(r2), (config["dim"] - 1) * r2, theta)
        try:
            kappa = generic_smalld_from_matrix(models[0].matrix, models[0].grid, theta, 1.0).w2F
        except DomainError:
            return None
        return dmin_from_smalld_coefficient(n_photons, kappa)

    def _dmin_rows(self, config: Dict[str, Any], n_grid: np.ndarray) -> List[Dict[str, Any]]:
        threads = config.get("threads", 1)
        models = MeasurementFactory.create_models(config, self.cache_for(config))
        summary = self._model_summary(config, models)
        curve = models[0].fisher if len(models) == 1 else EnsembleCurve(models)
        results = dmin_sweep(curve, n_grid, threads)
        direct = MeasurementFactory.create_direct_imaging(config) if config.get("direct_imaging") else None
        direct_results = dmin_sweep(direct.fisher, n_grid, threads) if direct is not None else []

        rows = []
        for i, (n, result) in enumerate(zip(n_grid, results)):
            analytic = self._analytic_dmin(config, models, float(n))
            row = {
                "N": float(n),
                "r2": config.get("r2"),
                "dmin_over_2w": result.dmin_over_2w,
                "dmin_analytic": None if analytic is None else analytic.dmin_over_2w,
                "status": result.status,
                "model": summary,
            }
            if direct is not None:
                row["dmin_direct_imaging"] = direct_results[i].dmin_over_2w
                row["dmin_direct_imaging_analytic"] = dmin_direct_imaging(float(n)).dmin_over_2w
            rows.append(row)
        self._log_scaling(rows)
        return rows

    def _log_scaling(self, rows: List[Dict[str, Any]]) -> None:
        points = [(row["N"], row["dmin_over_2w"]) for row in rows if row["status"] == "resolved"]
        if len(points) < MIN_FIT_POINTS:
            return
        span = math.log10(max(p[0] for p in points) / min(p[0] for p in points))
        if span < MIN_FIT_DECADES:
            return
        fit = scaling_exponent(points)
        self.logger.info(f"d_min scaling exponent {fit.exponent:.4f} (residual {fit.residual:.2e})")
        for window in local_slopes(points):
            self.logger.debug(f"local slope {window['slope']:.4f} around N={window['n_center']:.3g}")

    def cmd_dmin(self, config: Dict[str, Any]) -> str:
        """
        Root-solved and analytic d_min over a photon-number grid, optionally swept over |r|².

        Unresolvable points keep an empty d_min and their status.
        """
        n_grid = parse_photon_numbers(config["n_photons"])
        rows = []
        if "r2_grid" in config:
            for r2 in parse_grid(config["r2_grid"]):
                point_config = {k: v for k, v in config.items() if k != "r2_grid"}
                point_config["r2"] = float(r2)
                rows += self._dmin_rows(point_config, n_grid)
        else:
            rows = self._dmin_rows(config, n_grid)
        columns = list(DMIN_COLUMNS)
        if config.get("direct_imaging"):
            columns += ["dmin_direct_imaging", "dmin_direct_imaging_analytic"]
        return self.formatter.format_table(columns, rows, config, config.get("format", "csv"))

    def cmd_audit_matrix(self, config: Dict[str, Any]) -> str:
        """
        Characterize a measured crosstalk matrix.

        Reports unitarity, crosstalk averages, the small-x Fisher coefficient,
        a d_min table, the uniform-equivalent crossover inequality and the
        photon number from which demultiplexing beats direct imaging.
        """
        theta, q = config["theta"], config["q_measured"]
        matrix = load_matrix(config["matrix"])
        model = CrosstalkDemux(matrix, q, theta)
        stats = crosstalk_stats(matrix)
        n_grid = parse_photon_numbers(config["n_photons"])

        try:
            kappa: Optional[float] = generic_smalld_from_matrix(matrix, model.grid, theta, 1.0).w2F
        except DomainError as e:
            self.logger.info(f"No small-x crosstalk law for {config['matrix']}: {e}")
            kappa = None

        p_scat = 1.0 - stats.avg_diag
        crossover = crossover_ratio(stats.avg_offdiag, p_scat)
        if not crossover.demux_beats_direct_imaging:
            self.logger.warning(
                f"|r|^2/(1-P_scat)^2 = {crossover.ratio:.4g} >= 1/8: direct imaging wins at large N"
            )

        direct = DirectImaging(theta)
        results = dmin_sweep(model.fisher, n_grid, config.get("threads", 1))
        table = []
        for n, result in zip(n_grid, results):
            table.append({
                "N": float(n),
                "dmin_over_2w": result.dmin_over_2w,
                "status": result.status,
                "dmin_smalld": None if not kappa else dmin_from_smalld_coefficient(float(n), kappa).dmin_over_2w,
                "dmin_direct_imaging_analytic": dmin_direct_imaging(float(n)).dmin_over_2w,
            })
        report = {
            "path": config["matrix"],
            "dim": matrix.dim,
            "q_measured": q,
            "theta": theta,
            "unitarity_deviation": matrix.unitarity_deviation(),
            "non_unitary": bool(matrix.provenance.details.get("non_unitary", False)),
            "stats": {
                "avg_diag": stats.avg_diag,
                "avg_offdiag": stats.avg_offdiag,
                "closure": stats.closure,
            },
            "ideal_behavior": kappa is None,
            "small_d_coefficient": kappa,
            "uniform_equivalent": {
                "r2": stats.avg_offdiag,
                "p_scat": p_scat,
                "ratio": crossover.ratio,
                "demux_beats_direct_imaging": crossover.demux_beats_direct_imaging,
            },
            "dmin_table": table,
            "crossover_photon_number": crossover_photon_number(model.fisher, direct.fisher, n_grid),
        }
        return self.formatter.format_json(report, config)

    def cmd_mle_verify(self, config: Dict[str, Any]) -> str:
        """Monte Carlo check of Cramér-Rao saturation for one measurement model."""
        model = MeasurementFactory.create_models(config, self.cache_for(config))[0]
        if not model.counts_outcomes:
            raise ConfigurationError(f"model '{config['model']}' has no discrete outcomes to simulate")
        n_photons = float(parse_photon_numbers(config["n_photons"])[0])
        scene = SceneParams(x=config["x_true"], theta=config["theta"], n_photons=n_photons)

        dmin = None
        if config.get("false_resolution", True):
            resolution = minimal_resolvable_distance(model.fisher, n_photons)
            dmin = resolution.dmin_over_2w

        report = crb_experiment(
            model.probabilities,
            scene,
            trials=config["trials"],
            seed=config["seed"],
            threads=config.get("threads", 1),
            dmin_over_2w=dmin,
            descriptor=model.descriptor(),
        )
        if config.get("per_trial"):
            trial_csv = self.formatter.format_csv(["trial", "x_hat", "at_boundary"], report.per_trial, config)
            self.formatter.write_to_report(config["per_trial"], trial_csv)
        data = report.to_dict()
        data["model"] = model.descriptor()
        return self.formatter.format_json(data, config)

    def cmd_calibrate_mu(self, config: Dict[str, Any]) -> str:
        """Coupling strength mu reaching a target ensemble-mean off-diagonal crosstalk."""
        dim, target = config["dim"], config["target_offdiag"]
        samples, seed = config["samples"], config["seed"]
        mu = MeasurementFactory.resolve_mu(config, self.cache_for(config))
        achieved = mu_scan(dim, [mu], samples, seed)[0]["mean_avg_offdiag"]
        data = {"dim": dim, "target": target, "mu": mu, "achieved": achieved, "samples": samples, "seed": seed}
        return self.formatter.format_json(data, config)

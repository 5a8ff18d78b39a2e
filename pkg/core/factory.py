"""
Factory module for creating measurement models.

This module builds measurement models from a validated run configuration:
the ideal sorter, a sorter behind a uniform, random or loaded crosstalk
matrix, and direct imaging.
"""

import logging
import math
from typing import Any, Dict, List, Optional

from ..measurements.crosstalk_demux import CrosstalkDemux
from ..measurements.direct_imaging import DirectImaging
from ..measurements.ideal import IdealDemux
from ..measurements.interface import IMeasurementModel
from ..physics.crosstalk import CrosstalkMatrix, calibrate_mu, load_matrix, sample_ensemble, uniform_crosstalk
from .cache import CalibrationCache
from .constants import DEFAULT_SAMPLES, SUPPORTED_MODELS
from .exceptions import ConfigurationError


class MeasurementFactory:
    """Factory for creating measurement models."""

    @staticmethod
    def resolve_mu(config: Dict[str, Any], cache: Optional[CalibrationCache] = None) -> float:
        """
        Coupling strength of a random ensemble, calibrated when a target is given.

        Args:
            config: Run configuration with either 'mu' or 'target_offdiag'
            cache: Optional CalibrationCache consulted before calibrating

        Returns:
            The coupling strength mu
        """
        if "mu" in config:
            return float(config["mu"])
        logger = logging.getLogger("factory")
        dim, target = config["dim"], float(config["target_offdiag"])
        samples, seed = config.get("samples", DEFAULT_SAMPLES), config["seed"]
        key = CalibrationCache.key(dim, target, samples, seed)
        if cache is not None:
            cached = cache.get(key)
            if cached is not None:
                logger.info(f"Using cached mu={cached:.8g} for {key}")
                return float(cached)
        mu = calibrate_mu(dim, target, samples, seed)
        if cache is not None:
            cache.set(key, mu)
        return mu

    @staticmethod
    def create_matrices(config: Dict[str, Any], cache: Optional[CalibrationCache] = None) -> List[CrosstalkMatrix]:
        """
        Crosstalk matrices described by the configuration.

        Returns:
            One matrix for the uniform and file models, the whole ensemble for the
            random model

        Raises:
            ConfigurationError: For the ideal model, which has no matrix
        """
        model = config["model"]
        if model == "uniform":
            return [uniform_crosstalk(config["dim"], math.sqrt(config["r2"]), config.get("convention", "real"))]
        if model == "file":
            return [load_matrix(config["matrix"])]
        if model == "random":
            mu = MeasurementFactory.resolve_mu(config, cache)
            return sample_ensemble(
                config["dim"], mu, config.get("samples", DEFAULT_SAMPLES), config["seed"], config.get("threads", 1)
            )
        raise ConfigurationError(f"model '{model}' has no crosstalk matrix")

    @staticmethod
    def create_models(config: Dict[str, Any], cache: Optional[CalibrationCache] = None) -> List[IMeasurementModel]:
        """
        Create the measurement models for a run.

        Args:
            config: A validated run configuration
            cache: Optional CalibrationCache shared across runs

        Returns:
            A list of measurement models; more than one only for random ensembles
        """
        logger = logging.getLogger("factory")
        model = config["model"]
        if model not in SUPPORTED_MODELS:
            raise ConfigurationError(f"Unsupported model '{model}'")
        q_measured = config.get("q_measured", 1)
        theta = config.get("theta", 0.0)

        if model == "ideal":
            models: List[IMeasurementModel] = [IdealDemux(q_measured, theta)]
        else:
            models = [CrosstalkDemux(c, q_measured, theta) for c in MeasurementFactory.create_matrices(config, cache)]
        logger.info(f"Created {len(models)} '{model}' measurement model(s)")
        return models

    @staticmethod
    def create_direct_imaging(config: Dict[str, Any]) -> DirectImaging:
        return DirectImaging(config.get("theta", 0.0))

"""
Measurement model interface.

This module defines the abstract base class that all measurement models implement.
A measurement model turns a scene into Fisher information and, for mode-sorting
measurements, into detection probabilities.
"""

from abc import ABC, abstractmethod
import logging
from typing import Any, Dict, Sequence

import numpy as np

from ..core.constants import X_FLOOR
from ..physics.fisher import FisherValue
from ..physics.modes import ProbabilityModel, SceneParams


class IMeasurementModel(ABC):
    """
    Abstract Base Class for measurement models.

    Subclasses implement the Fisher information at a half-separation x and
    describe themselves for run artifacts.
    """

    def __init__(self, theta: float = 0.0):
        """
        Initialize the model for a fixed tilt angle.

        Args:
            theta: Angle of the source separation against the first mode axis
        """
        self.theta = float(theta)
        self.logger = logging.getLogger(f"measurement.{self.name}")

    @property
    @abstractmethod
    def name(self) -> str:
        """
        Get the short model name (e.g., "ideal", "crosstalk").

        Returns:
            The model name as a string
        """

    @abstractmethod
    def descriptor(self) -> Dict[str, Any]:
        """
        Describe the model for embedding in output files.

        Returns:
            A JSON-serialisable dict
        """

    @abstractmethod
    def _fisher_at(self, x: float) -> FisherValue:
        """
        Fisher information at a half-separation at or above the floor.

        Args:
            x: Half-separation d/2w, never below X_FLOOR

        Returns:
            The FisherValue w²F
        """

    @property
    def counts_outcomes(self) -> bool:
        """Whether the model has discrete outcomes that can be simulated."""
        return False

    def probabilities(self, scene: SceneParams) -> ProbabilityModel:
        """
        Detection probabilities for a scene.

        Raises:
            NotImplementedError: For measurements without discrete outcomes
        """
        raise NotImplementedError(f"{self.name} measurement has no discrete detection outcomes")

    def fisher(self, x: float) -> FisherValue:
        """
        Fisher information w²F(x); x below the floor is evaluated at the floor.

        Args:
            x: Half-separation d/2w

        Returns:
            The FisherValue at max(x, X_FLOOR)
        """
        return self._fisher_at(max(float(x), X_FLOOR))

    def fisher_curve(self, xs: Sequence[float]) -> np.ndarray:
        """Fisher information over a grid of half-separations."""
        return np.array([self.fisher(x).w2F for x in xs])

    def scene(self, x: float, n_photons: float = 1.0) -> SceneParams:
        return SceneParams(x=x, theta=self.theta, n_photons=n_photons)

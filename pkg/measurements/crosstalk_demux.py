"""
Demultiplexing behind a crosstalk matrix.
"""

from typing import Any, Dict

from ..physics.crosstalk import CrosstalkMatrix
from ..physics.fisher import FisherValue, demux_probabilities, fisher_exact
from ..physics.modes import ModeGrid, ProbabilityModel, SceneParams
from .interface import IMeasurementModel


class CrosstalkDemux(IMeasurementModel):
    """
    Sorter whose detectors see the modes mixed by a crosstalk matrix.

    Only the modes with n, m <= q_measured of the crosstalk space are detected.
    """

    def __init__(self, matrix: CrosstalkMatrix, q_measured: int = 1, theta: float = 0.0):
        self.matrix = matrix
        self.grid = ModeGrid.for_dimension(matrix.dim, q_measured)
        super().__init__(theta)

    @property
    def name(self) -> str:
        return "crosstalk"

    @property
    def counts_outcomes(self) -> bool:
        return True

    def descriptor(self) -> Dict[str, Any]:
        return {
            "model": self.matrix.provenance.kind,
            "dim": self.matrix.dim,
            "q_measured": self.grid.q_measured,
            "theta": self.theta,
            "provenance": self.matrix.provenance.describe(),
        }

    def probabilities(self, scene: SceneParams) -> ProbabilityModel:
        return demux_probabilities(self.matrix, self.grid, scene)

    def _fisher_at(self, x: float) -> FisherValue:
        return fisher_exact(self.probabilities(self.scene(x)))

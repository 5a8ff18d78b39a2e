"""
Crosstalk-free Hermite-Gauss demultiplexing.
"""

from typing import Any, Dict

from ..physics.fisher import FisherValue, fisher_exact, fisher_ideal_closed_form
from ..physics.modes import ModeGrid, ProbabilityModel, SceneParams, ideal_probabilities
from .interface import IMeasurementModel


class IdealDemux(IMeasurementModel):
    """Ideal sorter detecting every mode with n, m <= q_measured."""

    def __init__(self, q_measured: int = 1, theta: float = 0.0):
        self.grid = ModeGrid(q_crosstalk=q_measured, q_measured=q_measured)
        super().__init__(theta)

    @property
    def name(self) -> str:
        return "ideal"

    @property
    def counts_outcomes(self) -> bool:
        return True

    def descriptor(self) -> Dict[str, Any]:
        return {"model": self.name, "q_measured": self.grid.q_measured, "theta": self.theta}

    def probabilities(self, scene: SceneParams) -> ProbabilityModel:
        return ideal_probabilities(self.grid, scene)

    def _fisher_at(self, x: float) -> FisherValue:
        return fisher_exact(self.probabilities(self.scene(x)))


class ClosedFormIdeal(IMeasurementModel):
    """
    Ideal sorter at θ = 0 through the incomplete-Gamma closed form.

    A large cutoff stands in for Q -> ∞.
    """

    def __init__(self, q_measured: int = 1):
        self.q_measured = int(q_measured)
        super().__init__(0.0)

    @property
    def name(self) -> str:
        return "closed_form"

    def descriptor(self) -> Dict[str, Any]:
        return {"model": "ideal", "method": "closed_form", "q_measured": self.q_measured, "theta": 0.0}

    def _fisher_at(self, x: float) -> FisherValue:
        return fisher_ideal_closed_form(self.q_measured, x)

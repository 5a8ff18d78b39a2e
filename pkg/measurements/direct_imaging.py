"""
Ideal direct imaging, the position-resolved intensity baseline.
"""

from typing import Any, Dict

from ..core.constants import QUADRATURE_EPSABS
from ..physics.fisher import FisherValue, fisher_direct_imaging
from .interface import IMeasurementModel


class DirectImaging(IMeasurementModel):
    """Continuous image-plane detection; Fisher information by 2D quadrature."""

    def __init__(self, theta: float = 0.0, epsabs: float = QUADRATURE_EPSABS):
        self.epsabs = epsabs
        super().__init__(theta)

    @property
    def name(self) -> str:
        return "direct_imaging"

    def descriptor(self) -> Dict[str, Any]:
        return {"model": self.name, "theta": self.theta}

    def _fisher_at(self, x: float) -> FisherValue:
        return fisher_direct_imaging(x, self.theta, self.epsabs)

"""
Hermite-Gauss mode overlaps and ideal detection probabilities.

All lengths are dimensionless: x = d/(2w) is the half-separation in units of
the beam width, and every probability derivative is taken with respect to x.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.integrate import dblquad
from scipy.special import eval_hermite, gammaln

from ..core.constants import ORACLE_EPSABS, QUADRATURE_MARGIN, X_FLOOR
from ..core.exceptions import DomainError, QuadratureError

TWO_PI = 2.0 * math.pi
ORACLE_MAX_ORDER = 6


@dataclass(frozen=True)
class SceneParams:
    """Two equal-intensity incoherent sources at ±r0 = ±(d/2)(cos θ, sin θ)."""

    x: float
    theta: float = 0.0
    n_photons: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.x) or self.x < 0:
            raise DomainError(f"half-separation x must be >= 0, got {self.x}")
        if not self.n_photons > 0:
            raise DomainError(f"n_photons must be positive, got {self.n_photons}")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    def with_x(self, x: float) -> "SceneParams":
        return SceneParams(x=x, theta=self.theta, n_photons=self.n_photons)

    def mirrored(self) -> "SceneParams":
        """The scene seen from the second source: r0 -> -r0."""
        return SceneParams(x=self.x, theta=self.theta + math.pi, n_photons=self.n_photons)


@dataclass(frozen=True)
class ModeGrid:
    """
    Hermite-Gauss index set.

    The crosstalk space holds all (n, m) with n, m <= q_crosstalk, flat-indexed
    row-major as k = n (q_crosstalk + 1) + m. Only modes with n, m <= q_measured
    are detected.
    """

    q_crosstalk: int
    q_measured: int = 1
    index_map: Dict[Tuple[int, int], int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.q_crosstalk < 0 or not 0 <= self.q_measured <= self.q_crosstalk:
            raise DomainError(
                f"need 0 <= q_measured <= q_crosstalk, got q_measured={self.q_measured}, "
                f"q_crosstalk={self.q_crosstalk}"
            )
        side = self.q_crosstalk + 1
        mapping = {(n, m): n * side + m for n in range(side) for m in range(side)}
        object.__setattr__(self, "index_map", mapping)

    @classmethod
    def for_dimension(cls, dim: int, q_measured: int = 1) -> "ModeGrid":
        side = math.isqrt(dim)
        if side * side != dim:
            raise DomainError(f"crosstalk dimension must be a perfect square, got {dim}")
        return cls(q_crosstalk=side - 1, q_measured=q_measured)

    @property
    def dimension(self) -> int:
        return (self.q_crosstalk + 1) ** 2

    def index(self, n: int, m: int) -> int:
        try:
            return self.index_map[(n, m)]
        except KeyError:
            raise DomainError(f"mode ({n}, {m}) outside the crosstalk space") from None

    def mode(self, k: int) -> Tuple[int, int]:
        if not 0 <= k < self.dimension:
            raise DomainError(f"flat index {k} outside 0..{self.dimension - 1}")
        return divmod(k, self.q_crosstalk + 1)

    def modes(self) -> List[Tuple[int, int]]:
        return [self.mode(k) for k in range(self.dimension)]

    def measured_indices(self) -> np.ndarray:
        q = self.q_measured
        return np.array(
            [self.index_map[(n, m)] for n in range(q + 1) for m in range(q + 1)], dtype=int
        )

    def orders(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-axis indices (n, m) for every flat index."""
        flat = np.arange(self.dimension)
        return np.divmod(flat, self.q_crosstalk + 1)


@dataclass(frozen=True, eq=False)
class ProbabilityModel:
    """
    Detection probabilities and their x-derivatives.

    probs_full and dprobs_full cover the whole crosstalk space; probs and dprobs
    restrict them to the measured modes.
    """

    grid: ModeGrid
    scene: SceneParams
    probs_full: np.ndarray
    dprobs_full: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        return self.probs_full[self.grid.measured_indices()]

    @property
    def dprobs(self) -> np.ndarray:
        return self.dprobs_full[self.grid.measured_indices()]

    @property
    def captured(self) -> float:
        """Total probability captured by the crosstalk space."""
        return float(np.sum(self.probs_full))


def _log_trig_and_norm(n: np.ndarray, m: np.ndarray, theta: float):
    """log|cos^n sin^m / sqrt(n! m!)| and the sign of cos^n sin^m."""
    c, s = math.cos(theta), math.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_c = np.where(n > 0, n * np.log(abs(c)), 0.0)
        log_s = np.where(m > 0, m * np.log(abs(s)), 0.0)
    log_norm = -0.5 * (gammaln(n + 1.0) + gammaln(m + 1.0))
    sign = np.where((n % 2 == 1) & (c < 0), -1.0, 1.0) * np.where((m % 2 == 1) & (s < 0), -1.0, 1.0)
    return log_c + log_s + log_norm, sign


def overlap_vectors(grid: ModeGrid, x: float, theta: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Overlaps beta_nm(r0) and d beta_nm / dx for every mode of the crosstalk space.

    beta_nm = x^(n+m) cos^n(θ) sin^m(θ) exp(-x²/2) / sqrt(n! m!), evaluated in
    log space so that n + m of several tens neither overflows nor loses the
    factorial normalisation.
    """
    if x < 0:
        raise DomainError(f"half-separation x must be >= 0, got {x}")
    n, m = grid.orders()
    k = n + m
    log_angular, sign = _log_trig_and_norm(n, m, theta)
    if x == 0.0:
        beta = np.where(k == 0, 1.0, 0.0)
        # only k == 1 survives in k x^(k-1) - x^(k+1)
        dbeta = np.where(k == 1, sign * np.exp(log_angular), 0.0)
        return beta, dbeta
    beta = sign * np.exp(log_angular + k * math.log(x) - 0.5 * x * x)
    dbeta = beta * (k / x - x)
    return beta, dbeta


def hermite_gauss_overlap(n: int, m: int, scene: SceneParams) -> float:
    """
    Closed-form overlap of the mode u_nm with the point-spread function centred at r0.

    Args:
        n: Mode index along the first axis
        m: Mode index along the second axis
        scene: Separation and tilt

    Returns:
        beta_nm(r0), always real with |beta_nm| <= 1
    """
    if n < 0 or m < 0:
        raise DomainError(f"mode indices must be non-negative, got ({n}, {m})")
    n_arr, m_arr = np.array([n]), np.array([m])
    log_angular, sign = _log_trig_and_norm(n_arr, m_arr, scene.theta)
    if scene.x == 0.0:
        return 1.0 if n + m == 0 else 0.0
    value = sign[0] * math.exp(log_angular[0] + (n + m) * math.log(scene.x) - 0.5 * scene.x ** 2)
    return float(value)


def _hg_1d(order: int, u: float) -> float:
    """Normalised 1D Hermite-Gauss field with unit beam width: |psi|^2 integrates to 1."""
    norm = (2.0 / math.pi) ** 0.25 / math.sqrt(2.0 ** order * math.factorial(order))
    return norm * eval_hermite(order, math.sqrt(2.0) * u) * math.exp(-u * u)


def overlap_oracle(n: int, m: int, scene: SceneParams, epsabs: float = ORACLE_EPSABS) -> float:
    """
    Overlap integral of u_nm with the displaced point-spread function by 2D quadrature.

    Intended as an independent check of hermite_gauss_overlap at low order.

    Raises:
        DomainError: If n or m exceeds the oracle order limit
        QuadratureError: If the error estimate exceeds 1e-8
    """
    if not (0 <= n <= ORACLE_MAX_ORDER and 0 <= m <= ORACLE_MAX_ORDER):
        raise DomainError(f"overlap oracle supports orders up to {ORACLE_MAX_ORDER}, got ({n}, {m})")
    ax = scene.x * math.cos(scene.theta)
    ay = scene.x * math.sin(scene.theta)
    half_width = scene.x + QUADRATURE_MARGIN

    def integrand(v, u):
        return _hg_1d(n, u) * _hg_1d(m, v) * _hg_1d(0, u - ax) * _hg_1d(0, v - ay)

    value, error = dblquad(
        integrand, -half_width, half_width, -half_width, half_width,
        epsabs=epsabs, epsrel=1e-12,
    )
    if error > 1e-8:
        raise QuadratureError(f"overlap oracle for mode ({n}, {m}) did not converge", error)
    return float(value)


def ideal_probabilities(grid: ModeGrid, scene: SceneParams) -> ProbabilityModel:
    """
    Detection probabilities of a crosstalk-free Hermite-Gauss measurement.

    p(nm) = beta_nm(r0)^2 and dp/dx = 2 beta beta' = (2/x)(n + m - x²) p.

    Raises:
        DomainError: If scene.x is below X_FLOOR
    """
    if scene.x < X_FLOOR:
        raise DomainError(f"x={scene.x:.3e} is below the floor {X_FLOOR:.0e}")
    beta, dbeta = overlap_vectors(grid, scene.x, scene.theta)
    return ProbabilityModel(
        grid=grid,
        scene=scene,
        probs_full=beta * beta,
        dprobs_full=2.0 * beta * dbeta,
    )

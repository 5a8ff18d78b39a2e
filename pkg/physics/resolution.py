"""
Signal-to-noise ratio and minimal resolvable distance.

d_min is the smallest separation with SNR(d) = d √(N F(d)) = 1. Results are
expressed as d_min / 2w, the half-separation x at which the criterion holds.
"""

import concurrent.futures
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from ..core.constants import (
    MIN_FIT_DECADES,
    MIN_FIT_POINTS,
    SCAN_POINTS,
    SCAN_X_MAX,
    SCAN_X_MIN,
    SNR_TOL,
)
from ..core.exceptions import DomainError, RootNotFoundError
from .fisher import FisherValue
from .modes import SceneParams

logger = logging.getLogger("resolution")

FisherCurve = Callable[[float], Union[FisherValue, float]]

STATUS_RESOLVED = "resolved"
STATUS_UNRESOLVABLE = "unresolvable"
STATUS_BELOW_SCAN = "below_scan"

ROOT_METHODS = {"root_solve", "analytic_ideal", "analytic_uniform", "analytic_direct_imaging", "analytic_small_d"}

_ROOT_XTOL = 1e-18
DIRECT_IMAGING_FACTOR = 0.5 ** 0.25
CROSSOVER_THRESHOLD = 1.0 / 8.0


@dataclass(frozen=True)
class ResolutionResult:
    """
    Minimal resolvable distance for one photon number.

    dmin_over_2w is None unless status is 'resolved'. brackets lists every
    sign change of SNR - 1 found on the scan grid, the first one certifies
    the returned root.
    """

    dmin_over_2w: Optional[float]
    n_photons: float
    method: str
    bracket: Optional[Tuple[float, float]] = None
    status: str = STATUS_RESOLVED
    brackets: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.method not in ROOT_METHODS:
            raise ValueError(f"unknown d_min method '{self.method}'")

    @property
    def resolved(self) -> bool:
        return self.status == STATUS_RESOLVED

    @property
    def dmin_over_w(self) -> Optional[float]:
        return None if self.dmin_over_2w is None else 2.0 * self.dmin_over_2w


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    intercept: float
    n_range: Tuple[float, float]
    residual: float
    n_points: int


class Crossover(NamedTuple):
    ratio: float
    demux_beats_direct_imaging: bool


def _as_w2f(value: Union[FisherValue, float]) -> float:
    return value.w2F if isinstance(value, FisherValue) else float(value)


def snr(x: float, scene: SceneParams, w2F: Union[FisherValue, float]) -> float:
    """
    Signal-to-noise ratio 2x √(N w²F), the dimensionless form of d √(N F).

    Args:
        x: Half-separation d/2w
        scene: Supplies the photon number N
        w2F: Single-photon Fisher information in units of w⁻²
    """
    value = _as_w2f(w2F)
    if x < 0 or value < 0:
        raise DomainError(f"SNR needs non-negative x and Fisher information, got x={x}, w2F={value}")
    return 2.0 * x * math.sqrt(scene.n_photons * value)


def _snr_at(fi_curve: FisherCurve, n_photons: float, x: float) -> float:
    return 2.0 * x * math.sqrt(n_photons * _as_w2f(fi_curve(x)))


def minimal_resolvable_distance(
    fi_curve: FisherCurve,
    n_photons: float,
    x_min: float = SCAN_X_MIN,
    x_max: float = SCAN_X_MAX,
    points: int = SCAN_POINTS,
) -> ResolutionResult:
    """
    Smallest root of SNR(x) = 1.

    SNR - 1 is sampled on a log grid over [x_min, x_max]; the first sign change
    is refined with Brent's method until |SNR - 1| < 1e-9.

    Args:
        fi_curve: Maps x to the Fisher information w²F(x)
        n_photons: Detected photon number N
        x_min: Lower end of the scan
        x_max: Upper end of the scan
        points: Number of scan points

    Returns:
        A ResolutionResult; status 'unresolvable' when SNR stays below 1 and
        'below_scan' when SNR already exceeds 1 at x_min

    Raises:
        RootNotFoundError: If the refined root fails the SNR tolerance
    """
    if not n_photons > 0:
        raise DomainError(f"photon number must be positive, got {n_photons}")
    if not 0 < x_min < x_max or points < 2:
        raise DomainError(f"invalid scan domain [{x_min}, {x_max}] with {points} points")

    grid = np.geomspace(x_min, x_max, points)
    excess = np.array([_snr_at(fi_curve, n_photons, x) - 1.0 for x in grid])
    positive = excess >= 0
    changes = np.nonzero(positive[1:] != positive[:-1])[0]
    brackets = [(float(grid[i]), float(grid[i + 1])) for i in changes]
    if len(brackets) > 1:
        logger.debug(f"N={n_photons:g}: {len(brackets)} sign changes of SNR-1, keeping the smallest root")

    if positive[0]:
        logger.warning(f"N={n_photons:g}: SNR >= 1 already at x={x_min:g}, root lies below the scan")
        return ResolutionResult(None, n_photons, "root_solve", status=STATUS_BELOW_SCAN, brackets=brackets)
    if not brackets:
        logger.info(f"N={n_photons:g}: unresolvable on x <= {x_max:g}")
        return ResolutionResult(None, n_photons, "root_solve", status=STATUS_UNRESOLVABLE)

    lo, hi = brackets[0]
    root = brentq(lambda x: _snr_at(fi_curve, n_photons, x) - 1.0, lo, hi, xtol=_ROOT_XTOL, maxiter=200)
    residual = abs(_snr_at(fi_curve, n_photons, root) - 1.0)
    if residual > SNR_TOL:
        raise RootNotFoundError(
            f"SNR root at x={root:.12g} misses the tolerance: |SNR-1|={residual:.2e} (N={n_photons:g})"
        )
    logger.debug(f"N={n_photons:g}: d_min/2w={root:.12g} in [{lo:.6g}, {hi:.6g}]")
    return ResolutionResult(float(root), n_photons, "root_solve", bracket=(lo, hi), brackets=brackets)


def dmin_ideal(n_photons: float) -> ResolutionResult:
    """Shot-noise limit d_min = w/√N."""
    if not n_photons > 0:
        raise DomainError(f"photon number must be positive, got {n_photons}")
    return ResolutionResult(0.5 / math.sqrt(n_photons), n_photons, "analytic_ideal")


def dmin_uniform(n_photons: float, r: complex, p_scat: float = 0.0, theta: float = 0.0) -> ResolutionResult:
    """
    Large-N d_min under uniform crosstalk.

    d_min = (w / N^¼) √(2|r| / (1 - P_scat)) (4 / (3 + cos 4θ))^¼; P_scat = 0 gives the
    lossless law.
    """
    magnitude = abs(r)
    if not n_photons > 0:
        raise DomainError(f"photon number must be positive, got {n_photons}")
    if magnitude == 0:
        raise DomainError("|r|^2 must be positive for the crosstalk-limited law")
    if not p_scat < 1:
        raise DomainError(f"P_scat must be < 1, got {p_scat}")
    dmin_over_w = (
        n_photons ** -0.25
        * math.sqrt(2.0 * magnitude / (1.0 - p_scat))
        * (4.0 / (3.0 + math.cos(4.0 * theta))) ** 0.25
    )
    return ResolutionResult(0.5 * dmin_over_w, n_photons, "analytic_uniform")


def dmin_direct_imaging(n_photons: float) -> ResolutionResult:
    """Large-N d_min of ideal direct imaging, (w / N^¼)(½)^¼."""
    if not n_photons > 0:
        raise DomainError(f"photon number must be positive, got {n_photons}")
    return ResolutionResult(0.5 * n_photons ** -0.25 * DIRECT_IMAGING_FACTOR, n_photons, "analytic_direct_imaging")


def dmin_from_smalld_coefficient(n_photons: float, kappa: float) -> ResolutionResult:
    """
    d_min from a quadratic small-x law w²F = κ x².

    SNR = 2 √(N κ) x², so d_min/2w = (4 N κ)^(-¼). For the uniform model this is
    the crosstalk-limited law; for a measured matrix κ comes from the generic
    small-x law.
    """
    if not n_photons > 0 or not kappa > 0:
        raise DomainError(f"need N > 0 and a positive small-x coefficient, got N={n_photons}, kappa={kappa}")
    return ResolutionResult((4.0 * n_photons * kappa) ** -0.25, n_photons, "analytic_small_d")


def crossover_ratio(r2: float, p_scat: float) -> Crossover:
    """Uniform demultiplexing beats direct imaging at large N iff |r|² / (1 - P_scat)² < 1/8."""
    if r2 < 0 or not p_scat < 1:
        raise DomainError(f"need |r|^2 >= 0 and P_scat < 1, got {r2}, {p_scat}")
    ratio = r2 / (1.0 - p_scat) ** 2
    return Crossover(ratio, ratio < CROSSOVER_THRESHOLD)


def _memoized(fi_curve: FisherCurve) -> FisherCurve:
    return functools.lru_cache(maxsize=None)(fi_curve)


def dmin_sweep(fi_curve: FisherCurve, n_grid: Sequence[float], threads: int = 1) -> List[ResolutionResult]:
    """
    Root-solved d_min over a photon-number grid.

    The Fisher curve does not depend on N, so its values are shared across the
    sweep. Results are ordered by grid index.
    """
    curve = _memoized(fi_curve)
    solve = functools.partial(minimal_resolvable_distance, curve)
    if threads <= 1:
        return [solve(n) for n in n_grid]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(solve, n_grid))


def crossover_photon_number(
    fi_demux: FisherCurve,
    fi_direct: FisherCurve,
    n_grid: Sequence[float],
) -> Optional[float]:
    """
    Smallest N on the grid from which demultiplexing resolves finer than direct imaging.

    Unresolvable points count as infinitely coarse. Returns None when direct imaging
    wins at the largest grid point.
    """
    ordered = sorted(float(n) for n in n_grid)
    demux = dmin_sweep(fi_demux, ordered)
    direct = dmin_sweep(fi_direct, ordered)

    def coarseness(result: ResolutionResult) -> float:
        if result.status == STATUS_BELOW_SCAN:
            return 0.0
        return result.dmin_over_2w if result.resolved else math.inf

    crossover = None
    for n, ours, theirs in reversed(list(zip(ordered, demux, direct))):
        if coarseness(ours) < coarseness(theirs):
            crossover = n
        else:
            break
    return crossover


def _log_points(points: Sequence[Tuple[float, float]]) -> Tuple[np.ndarray, np.ndarray]:
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise DomainError("scaling points must be (N, d_min) pairs")
    if np.any(data <= 0) or not np.all(np.isfinite(data)):
        raise DomainError("scaling points must be positive and finite")
    order = np.argsort(data[:, 0])
    return np.log10(data[order, 0]), np.log10(data[order, 1])


def scaling_exponent(
    points: Sequence[Tuple[float, float]],
    min_points: int = MIN_FIT_POINTS,
    min_decades: float = MIN_FIT_DECADES,
) -> ScalingFit:
    """
    Least-squares slope of log d_min against log N.

    Args:
        points: (N, d_min) pairs
        min_points: Minimum number of points
        min_decades: Minimum span of N in decades

    Returns:
        ScalingFit with the root-mean-square residual in log10 units

    Raises:
        DomainError: If there are too few points or the N range is too narrow
    """
    log_n, log_d = _log_points(points)
    if len(log_n) < min_points:
        raise DomainError(f"scaling fit needs at least {min_points} points, got {len(log_n)}")
    span = log_n[-1] - log_n[0]
    if span < min_decades - 1e-12:
        raise DomainError(f"scaling fit needs N spanning {min_decades} decades, got {span:.3g}")
    slope, intercept = np.polyfit(log_n, log_d, 1)
    residual = float(np.sqrt(np.mean((log_d - (slope * log_n + intercept)) ** 2)))
    return ScalingFit(
        exponent=float(slope),
        intercept=float(intercept),
        n_range=(float(10 ** log_n[0]), float(10 ** log_n[-1])),
        residual=residual,
        n_points=len(log_n),
    )


def local_slopes(points: Sequence[Tuple[float, float]], window_decades: float = 1.0) -> List[Dict[str, float]]:
    """
    Sliding-window slopes of log d_min against log N.

    Each window starts at a grid point and spans window_decades; windows with
    fewer than three points are skipped.
    """
    log_n, log_d = _log_points(points)
    slopes = []
    for start in range(len(log_n)):
        inside = (log_n >= log_n[start]) & (log_n <= log_n[start] + window_decades + 1e-12)
        if inside.sum() < 3 or log_n[inside][-1] - log_n[start] < window_decades - 1e-12:
            continue
        slope, _ = np.polyfit(log_n[inside], log_d[inside], 1)
        slopes.append({
            "n_center": float(10 ** np.mean(log_n[inside])),
            "slope": float(slope),
        })
    return slopes

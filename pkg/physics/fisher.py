"""
Fisher-information engines.

Every value is the dimensionless single-photon Fisher information w²F for
the separation d, reported as a FisherValue tagged with the method that
produced it.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from scipy.integrate import dblquad
from scipy.special import gammaincc

from ..core.constants import (
    DP_FLOOR,
    P_FLOOR,
    QUADRATURE_EPSABS,
    QUADRATURE_EPSREL,
    QUADRATURE_MARGIN,
    QUANTUM_FISHER,
    X_FLOOR,
)
from ..core.exceptions import DomainError, QuadratureError, SingularFisherTermError
from .crosstalk import CrosstalkMatrix
from .modes import ModeGrid, ProbabilityModel, SceneParams, overlap_vectors

logger = logging.getLogger("fisher")

METHODS = {"exact_sum", "closed_form", "small_d_uniform", "small_d_generic", "direct_imaging"}
UNIFORM_FORMS = {"full", "aligned", "weak", "weak_lossless"}


@dataclass(frozen=True)
class FisherValue:
    w2F: float
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown Fisher method '{self.method}'")
        if not self.w2F >= 0:
            raise DomainError(f"Fisher information must be non-negative, got {self.w2F}")

    def __float__(self) -> float:
        return self.w2F


def quantum_limit() -> float:
    """w²F_q = 1 for the separation of two incoherent point sources."""
    return QUANTUM_FISHER


def _check_demux_inputs(matrix: CrosstalkMatrix, grid: ModeGrid, scene: SceneParams) -> None:
    if matrix.dim != grid.dimension:
        raise DomainError(
            f"crosstalk matrix dimension {matrix.dim} does not match mode grid dimension {grid.dimension}"
        )
    if scene.x < X_FLOOR:
        raise DomainError(f"x={scene.x:.3e} is below the floor {X_FLOOR:.0e}")


def demux_probabilities(matrix: CrosstalkMatrix, grid: ModeGrid, scene: SceneParams) -> ProbabilityModel:
    """
    Detection probabilities behind a crosstalk matrix.

    p(nm) = ½(|γ_nm(r0)|² + |γ_nm(-r0)|²) with γ = C* β, both displacements
    evaluated explicitly. Derivatives follow from the analytic dβ/dx.

    Raises:
        DomainError: If the matrix and grid dimensions differ or x is below the floor
    """
    _check_demux_inputs(matrix, grid, scene)
    conj = matrix.entries.conj()
    probs = np.zeros(grid.dimension)
    dprobs = np.zeros(grid.dimension)
    for displaced in (scene, scene.mirrored()):
        beta, dbeta = overlap_vectors(grid, displaced.x, displaced.theta)
        gamma = conj @ beta
        dgamma = conj @ dbeta
        probs += 0.5 * np.abs(gamma) ** 2
        dprobs += np.real(gamma.conj() * dgamma)
    return ProbabilityModel(grid=grid, scene=scene, probs_full=probs, dprobs_full=dprobs)


def parity_restricted_probabilities(matrix: CrosstalkMatrix, grid: ModeGrid, scene: SceneParams) -> np.ndarray:
    """
    Probabilities from the double sum over (kl, pq) with k + l + p + q even.

    Equivalent to demux_probabilities; kept as an independent evaluation.
    """
    _check_demux_inputs(matrix, grid, scene)
    beta, _ = overlap_vectors(grid, scene.x, scene.theta)
    n, m = grid.orders()
    order = n + m
    even = (order[:, None] + order[None, :]) % 2 == 0
    kernel = np.where(even, np.outer(beta, beta), 0.0)
    c = matrix.entries
    return np.einsum("na,ab,nb->n", c.conj(), kernel, c).real


def fisher_exact(model: ProbabilityModel) -> FisherValue:
    """
    w²F = ¼ Σ_k (dp_k/dx)² / p_k over the measured modes.

    Terms with p < 1e-300 and |dp/dx| < 1e-150 contribute 0.

    Raises:
        SingularFisherTermError: If a vanishing p carries a non-negligible derivative
    """
    measured = model.grid.measured_indices()
    total = 0.0
    for k in measured:
        p = float(model.probs_full[k])
        dp = float(model.dprobs_full[k])
        if p < P_FLOOR:
            if abs(dp) < DP_FLOOR:
                continue
            raise SingularFisherTermError(int(k), p, dp)
        total += dp * dp / p
    return FisherValue(0.25 * total, "exact_sum")


def fisher_ideal_sum(q: int, x: float, theta: float) -> float:
    """
    Ideal-measurement Fisher information summed mode by mode in closed form.

    Σ_{n,m<=Q} x^(2(n+m-1)) (n+m-x²)² cos^2n(θ) sin^2m(θ) e^(-x²) / (n! m!)
    """
    if q < 0 or x < 0:
        raise DomainError(f"need Q >= 0 and x >= 0, got Q={q}, x={x}")
    c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    z = x * x
    total = 0.0
    for n in range(q + 1):
        for m in range(q + 1):
            k = n + m
            # k = 0: x^-2 (x²)² = x²
            radial = z if k == 0 else z ** (k - 1) * (k - z) ** 2
            total += radial * c2 ** n * s2 ** m / (math.factorial(n) * math.factorial(m))
    return total * math.exp(-z)


def fisher_ideal_closed_form(q: int, x: float) -> FisherValue:
    """
    Ideal measurement at θ = 0 (or π/2) via the upper incomplete Gamma function.

    w²F = [e^(-x²)(x² - (Q+1)) x^(2Q) + Γ(Q+1, x²)] / Q!, with Γ(Q+1, z)/Q! the
    regularised upper incomplete Gamma (the finite Poisson tail sum for integer Q).
    """
    if not isinstance(q, (int, np.integer)) or q < 1:
        raise DomainError(f"cutoff Q must be an integer >= 1, got {q}")
    if x < 0:
        raise DomainError(f"x must be >= 0, got {x}")
    z = x * x
    head = 0.0
    if z > 0:
        head = math.exp(-z + q * math.log(z) - math.lgamma(q + 1)) * (z - (q + 1))
    return FisherValue(max(head + float(gammaincc(q + 1, z)), 0.0), "closed_form")


def theta_profile(q: int, x: float, thetas: Sequence[float]) -> np.ndarray:
    """F(d, θ) - F(d, 0) for an ideal measurement, in units of w⁻²."""
    reference = fisher_ideal_sum(q, x, 0.0)
    return np.array([fisher_ideal_sum(q, x, t) - reference for t in thetas])


def _check_uniform_amplitudes(dim: int, r: complex, t: complex) -> None:
    r2, t2 = abs(r) ** 2, abs(t) ** 2
    if abs(t2 + (dim - 1) * r2 - 1.0) > 1e-9:
        raise DomainError(f"|t|^2 + (D-1)|r|^2 = {t2 + (dim - 1) * r2:.12g}, expected 1")
    if r2 == 0:
        raise DomainError("r = 0 makes the small-d crosstalk law diverge; use the ideal model")
    if t2 == 0:
        raise DomainError("t = 0 is outside the weak-crosstalk regime")


def fisher_uniform_smalld(
    dim: int,
    r: complex,
    t: complex,
    theta: float,
    x: float,
    q: int = 1,
    form: str = "full",
) -> FisherValue:
    """
    Leading small-separation Fisher information of the uniform crosstalk model.

    Args:
        dim: Crosstalk dimension D
        r: Off-diagonal amplitude
        t: Diagonal amplitude, |t|² + (D-1)|r|² = 1
        theta: Tilt angle
        x: Half-separation, x ≪ |r| is the caller's responsibility
        q: Measured cutoff Q
        form: 'full' keeps every O(x²) term, 'aligned' is the θ = 0 expression,
            'weak' the |r|² ≪ 1 law at fixed P_scat and 'weak_lossless' its
            P_scat -> 0 limit

    Returns:
        FisherValue with method small_d_uniform
    """
    if form not in UNIFORM_FORMS:
        raise DomainError(f"unknown small-d form '{form}'")
    _check_uniform_amplitudes(dim, r, t)
    r2, t2 = abs(r) ** 2, abs(t) ** 2
    z = x * x
    if form == "aligned":
        value = z * (r2 * r2 / t2 + t2 * t2 / r2 - r2 - t2)
    elif form in ("weak", "weak_lossless"):
        angular = (3.0 + math.cos(4.0 * theta)) / 4.0
        p_scat = (dim - 1) * r2 if form == "weak" else 0.0
        value = z * angular * (1.0 - p_scat) ** 2 / r2
    else:
        c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
        sin2 = math.sin(2.0 * theta)
        g = sin2 * (r2 + (np.conj(t) * r).real)
        value = z * (
            (r2 - t2 + g) ** 2 / t2
            + (c2 * (t2 - r2) + g) ** 2 / r2
            + (s2 * (t2 - r2) + g) ** 2 / r2
            + g * g / r2
        ) + 4.0 * z * (q - 1) ** 2 * sin2 ** 2 * r2
    return FisherValue(float(value), "small_d_uniform")


def fisher_generic_smalld(
    c00_01: complex,
    c00_10: complex,
    c01_01: complex,
    c01_00: complex,
    c10_10: complex,
    c10_00: complex,
    theta: float,
    x: float,
) -> FisherValue:
    """
    Small-separation law for generic weak crosstalk.

    w²F = x² (|c01,01|⁴ sin⁴θ / |c01,00|² + |c10,10|⁴ cos⁴θ / |c10,00|²).
    The entries c00,01 and c00,10 only enter the weak-crosstalk sanity check.

    Raises:
        DomainError: If a scatter amplitude into mode 00 vanishes
    """
    if c01_00 == 0 or c10_00 == 0:
        raise DomainError("zero scatter amplitude into mode 00 makes the prediction diverge")
    diagonal = min(abs(c01_01), abs(c10_10))
    largest_offdiag = max(abs(c00_01), abs(c00_10), abs(c01_00), abs(c10_00))
    if largest_offdiag >= diagonal:
        logger.warning(
            f"off-diagonal amplitude {largest_offdiag:.3g} is not small against diagonal {diagonal:.3g}; "
            "the weak-crosstalk law does not apply"
        )
    s4, c4 = math.sin(theta) ** 4, math.cos(theta) ** 4
    value = x * x * (
        abs(c01_01) ** 4 * s4 / abs(c01_00) ** 2 + abs(c10_10) ** 4 * c4 / abs(c10_00) ** 2
    )
    return FisherValue(float(value), "small_d_generic")


def generic_smalld_from_matrix(matrix: CrosstalkMatrix, grid: ModeGrid, theta: float, x: float) -> FisherValue:
    """fisher_generic_smalld with entries c_{nm,kl} read through the grid index map."""
    if matrix.dim != grid.dimension:
        raise DomainError(f"matrix dimension {matrix.dim} does not match grid dimension {grid.dimension}")
    c = matrix.entries

    def entry(row, col):
        return c[grid.index(*row), grid.index(*col)]

    return fisher_generic_smalld(
        c00_01=entry((0, 0), (0, 1)),
        c00_10=entry((0, 0), (1, 0)),
        c01_01=entry((0, 1), (0, 1)),
        c01_00=entry((0, 1), (0, 0)),
        c10_10=entry((1, 0), (1, 0)),
        c10_00=entry((1, 0), (0, 0)),
        theta=theta,
        x=x,
    )


def fisher_direct_imaging(x: float, theta: float = 0.0, epsabs: float = QUADRATURE_EPSABS) -> FisherValue:
    """
    Direct-imaging Fisher information by 2D adaptive quadrature.

    Integrates (∂p/∂d)² / p with p(r) = ½(|u00(r - r0)|² + |u00(r + r0)|²) over a
    square of half-width x + 8 (units of w), beam width w = 1.

    Raises:
        QuadratureError: If the error estimate misses the tolerance
    """
    if x < 0:
        raise DomainError(f"x must be >= 0, got {x}")
    ex, ey = math.cos(theta), math.sin(theta)
    ax, ay = x * ex, x * ey
    half_width = x + QUADRATURE_MARGIN
    norm = 2.0 / math.pi

    def integrand(v, u):
        minus = norm * math.exp(-2.0 * ((u - ax) ** 2 + (v - ay) ** 2))
        plus = norm * math.exp(-2.0 * ((u + ax) ** 2 + (v + ay) ** 2))
        p = 0.5 * (minus + plus)
        if p <= 0.0:
            return 0.0
        dp = ((u - ax) * ex + (v - ay) * ey) * minus - ((u + ax) * ex + (v + ay) * ey) * plus
        return dp * dp / p

    value, error = dblquad(
        integrand, -half_width, half_width, -half_width, half_width,
        epsabs=epsabs, epsrel=QUADRATURE_EPSREL,
    )
    logger.debug(f"direct imaging x={x:.6g}: w2F={value:.10g} (error estimate {error:.2e})")
    if error > max(epsabs, QUADRATURE_EPSREL * abs(value)):
        raise QuadratureError(f"direct-imaging quadrature at x={x}", error)
    return FisherValue(max(float(value), 0.0), "direct_imaging")


def ensemble_fisher(matrices: Sequence[CrosstalkMatrix], grid: ModeGrid, scene: SceneParams) -> Dict[str, float]:
    """
    Mean and standard deviation over an ensemble, both for w²F and for SNR/√N = 2x√(w²F).

    The two band conventions differ once the ensemble spread is large, so both are kept.
    """
    values = np.array([fisher_exact(demux_probabilities(c, grid, scene)).w2F for c in matrices])
    sensitivity = 2.0 * scene.x * np.sqrt(values)
    spread = len(values) > 1
    return {
        "n_samples": len(values),
        "mean_w2F": float(values.mean()),
        "std_w2F": float(values.std(ddof=1)) if spread else 0.0,
        "mean_dsqrtF": float(sensitivity.mean()),
        "std_dsqrtF": float(sensitivity.std(ddof=1)) if spread else 0.0,
    }

"""
Crosstalk matrices: construction, random sampling, characterization and persistence.

Rows of a crosstalk matrix label detector modes, columns label ideal
Hermite-Gauss modes, both flat-indexed through ModeGrid.index_map.
"""

import concurrent.futures
import csv
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import polar

from ..core.constants import (
    CALIBRATION_MAX_ITER,
    CALIBRATION_REL_TOL,
    FLOAT_FORMAT,
    LOADED_UNITARITY_TOL,
    MU_MAX,
    UNIFORM_PHASE_CONVENTIONS,
)
from ..core.exceptions import CalibrationError, DomainError, ParsingError
from ..core.rng import PURPOSE_CALIBRATION, PURPOSE_CROSSTALK, make_stream

logger = logging.getLogger("crosstalk")

CSV_HEADER = ["row", "col", "re", "im"]


@dataclass(frozen=True)
class Provenance:
    """Where a crosstalk matrix came from: identity, random, uniform or loaded."""

    kind: str
    details: Dict[str, Any] = field(default_factory=dict)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, **self.details}


@dataclass(frozen=True, eq=False)
class CrosstalkMatrix:
    entries: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.complex128)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DomainError(f"crosstalk matrix must be square, got shape {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def unitarity_deviation(self) -> float:
        """max |(C^H C - I)_ij|"""
        gram = self.entries.conj().T @ self.entries
        return float(np.max(np.abs(gram - np.eye(self.dim))))


@dataclass(frozen=True)
class CrosstalkStats:
    dim: int
    avg_diag: float
    avg_offdiag: float

    @property
    def closure(self) -> float:
        """avg_diag + (D - 1) avg_offdiag; equals 1 for unitary matrices."""
        return self.avg_diag + (self.dim - 1) * self.avg_offdiag


@lru_cache(maxsize=16)
def _gell_mann_stack(dim: int) -> np.ndarray:
    generators = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=np.complex128)
            sym[j, k] = sym[k, j] = 1.0
            generators.append(sym)
    for j in range(dim):
        for k in range(j + 1, dim):
            anti = np.zeros((dim, dim), dtype=np.complex128)
            anti[j, k] = -1j
            anti[k, j] = 1j
            generators.append(anti)
    for l in range(1, dim):
        diag = np.zeros(dim)
        diag[:l] = 1.0
        diag[l] = -float(l)
        generators.append(np.diag(np.sqrt(2.0 / (l * (l + 1))) * diag).astype(np.complex128))
    stack = np.array(generators)
    stack.setflags(write=False)
    return stack


def gell_mann_basis(dim: int) -> np.ndarray:
    """
    Generalized Gell-Mann matrices spanning su(D).

    Returns the D² - 1 traceless Hermitian generators as an array of shape
    (D² - 1, D, D): symmetric pairs, antisymmetric pairs, then the D - 1
    diagonal matrices, normalised to Tr(G_a G_b) = 2 δ_ab.

    Raises:
        DomainError: If dim < 2
    """
    if dim < 2:
        raise DomainError(f"Gell-Mann basis needs D >= 2, got {dim}")
    return _gell_mann_stack(dim)


def identity_crosstalk(dim: int) -> CrosstalkMatrix:
    return CrosstalkMatrix(np.eye(dim, dtype=np.complex128), Provenance("identity"))


def _random_generator_coefficients(dim: int, rng: np.random.Generator) -> np.ndarray:
    # isotropic direction on the unit sphere in R^(D²-1)
    lam = rng.standard_normal(dim * dim - 1)
    return lam / np.linalg.norm(lam)


def _random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    lam = _random_generator_coefficients(dim, rng)
    return np.tensordot(lam, gell_mann_basis(dim), axes=1)


def _exp_minus_i(mu: float, eigenvalues: np.ndarray, eigenvectors: np.ndarray) -> np.ndarray:
    """V exp(-i mu Λ) V^H for (stacks of) Hermitian eigendecompositions."""
    phases = np.exp(-1j * mu * eigenvalues)
    return eigenvectors @ (phases[..., :, None] * np.swapaxes(eigenvectors.conj(), -1, -2))


def sample_random_crosstalk(
    dim: int,
    mu: float,
    rng: np.random.Generator,
    seed: Optional[int] = None,
    sample_index: Optional[int] = None,
) -> CrosstalkMatrix:
    """
    Sample C(mu) = exp(-i mu Σ λ_k G_k) with λ uniform on the unit sphere.

    Args:
        dim: Matrix dimension D
        mu: Coupling strength, mu >= 0
        rng: Stream that supplies the λ coefficients
        seed: Master seed recorded in the provenance
        sample_index: Sample index recorded in the provenance

    Returns:
        A unitary CrosstalkMatrix
    """
    if mu < 0:
        raise DomainError(f"coupling strength mu must be >= 0, got {mu}")
    hamiltonian = _random_hermitian(dim, rng)
    provenance = Provenance("random", {"mu": mu, "seed": seed, "sample_index": sample_index})
    if mu == 0:
        return CrosstalkMatrix(np.eye(dim, dtype=np.complex128), provenance)
    eigenvalues, eigenvectors = np.linalg.eigh(hamiltonian)
    return CrosstalkMatrix(_exp_minus_i(mu, eigenvalues, eigenvectors), provenance)


def sample_ensemble(dim: int, mu: float, samples: int, seed: int, threads: int = 1) -> List[CrosstalkMatrix]:
    """
    Draw an ensemble of random crosstalk matrices, one Philox stream per sample.

    The result is ordered by sample index and does not depend on `threads`.
    """
    if samples < 1:
        raise DomainError(f"samples must be >= 1, got {samples}")

    def draw(index: int) -> CrosstalkMatrix:
        rng = make_stream(seed, PURPOSE_CROSSTALK, index)
        return sample_random_crosstalk(dim, mu, rng, seed=seed, sample_index=index)

    logger.info(f"Sampling {samples} random {dim}x{dim} crosstalk matrices at mu={mu:.6g}")
    if threads <= 1:
        return [draw(i) for i in range(samples)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(draw, range(samples)))


def crosstalk_stats(matrix: Union[CrosstalkMatrix, np.ndarray]) -> CrosstalkStats:
    """Average |c_ii|² and average |c_ij|² (i != j) of one matrix."""
    entries = matrix.entries if isinstance(matrix, CrosstalkMatrix) else np.asarray(matrix)
    dim = entries.shape[0]
    power = np.abs(entries) ** 2
    diag_total = float(np.trace(power))
    offdiag_total = float(np.sum(power)) - diag_total
    return CrosstalkStats(dim=dim, avg_diag=diag_total / dim, avg_offdiag=offdiag_total / (dim * (dim - 1)))


def ensemble_stats(matrices: Sequence[CrosstalkMatrix]) -> Dict[str, float]:
    """Mean and standard deviation of the per-matrix crosstalk averages."""
    stats = [crosstalk_stats(c) for c in matrices]
    diag = np.array([s.avg_diag for s in stats])
    offdiag = np.array([s.avg_offdiag for s in stats])
    return {
        "samples": len(stats),
        "mean_avg_diag": float(diag.mean()),
        "std_avg_diag": float(diag.std(ddof=1)) if len(stats) > 1 else 0.0,
        "mean_avg_offdiag": float(offdiag.mean()),
        "std_avg_offdiag": float(offdiag.std(ddof=1)) if len(stats) > 1 else 0.0,
    }


class _CalibrationEnsemble:
    """Fixed λ draws, eigendecomposed once, so <avg_offdiag>(mu) is a smooth function."""

    def __init__(self, dim: int, samples: int, seed: int):
        hamiltonians = np.array([
            _random_hermitian(dim, make_stream(seed, PURPOSE_CALIBRATION, i)) for i in range(samples)
        ])
        self.dim = dim
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(hamiltonians)

    def mean_offdiag(self, mu: float) -> float:
        if mu == 0:
            return 0.0
        power = np.abs(_exp_minus_i(mu, self.eigenvalues, self.eigenvectors)) ** 2
        diag = np.trace(power, axis1=-2, axis2=-1)
        offdiag = (np.sum(power, axis=(-2, -1)) - diag) / (self.dim * (self.dim - 1))
        return float(offdiag.mean())


def mu_scan(dim: int, mus: Sequence[float], samples: int, seed: int) -> List[Dict[str, float]]:
    """Ensemble-averaged diagonal and off-diagonal crosstalk as a function of mu."""
    ensemble = _CalibrationEnsemble(dim, samples, seed)
    rows = []
    for mu in mus:
        offdiag = ensemble.mean_offdiag(mu)
        rows.append({"mu": float(mu), "mean_avg_offdiag": offdiag, "mean_avg_diag": 1.0 - (dim - 1) * offdiag})
    return rows


def calibrate_mu(dim: int, target_avg_offdiag: float, samples: int, seed: int, scan_points: int = 64) -> float:
    """
    Find mu whose ensemble-mean avg_offdiag equals the target.

    The λ draws are fixed for the whole search, the first crossing on a coarse
    mu grid over [0, π] is bracketed and then bisected.

    Raises:
        DomainError: If the target is outside (0, 1/(D-1))
        CalibrationError: If the target is not reached on [0, π] or the bisection
            ends more than CALIBRATION_REL_TOL away from it
    """
    if target_avg_offdiag == 0:
        return 0.0
    if not 0 < target_avg_offdiag < 1.0 / (dim - 1):
        raise DomainError(f"target crosstalk must lie in (0, 1/(D-1)) = (0, {1.0 / (dim - 1):.4g})")
    ensemble = _CalibrationEnsemble(dim, samples, seed)
    grid = np.linspace(0.0, MU_MAX, scan_points + 1)
    lower = upper = None
    for mu_lo, mu_hi in zip(grid[:-1], grid[1:]):
        if ensemble.mean_offdiag(mu_hi) >= target_avg_offdiag:
            lower, upper = mu_lo, mu_hi
            break
    if upper is None:
        reached = ensemble.mean_offdiag(MU_MAX)
        raise CalibrationError(
            f"target <|c_ij|^2>={target_avg_offdiag:g} unreachable for mu in [0, pi] (reached {reached:.4g} at pi)"
        )
    for _ in range(CALIBRATION_MAX_ITER):
        mid = 0.5 * (lower + upper)
        value = ensemble.mean_offdiag(mid)
        if abs(value - target_avg_offdiag) <= 1e-6 * target_avg_offdiag:
            lower = upper = mid
            break
        if value < target_avg_offdiag:
            lower = mid
        else:
            upper = mid
    mu = 0.5 * (lower + upper)
    achieved = ensemble.mean_offdiag(mu)
    if abs(achieved - target_avg_offdiag) > CALIBRATION_REL_TOL * target_avg_offdiag:
        raise CalibrationError(
            f"calibrated mu={mu:.6g} gives <|c_ij|^2>={achieved:.4g}, not within "
            f"{CALIBRATION_REL_TOL:.0%} of the target {target_avg_offdiag:g}"
        )
    logger.info(f"Calibrated mu={mu:.8g} for D={dim}, target <|c_ij|^2>={target_avg_offdiag:g}")
    return mu


def uniform_crosstalk(dim: int, r_magnitude: float, convention: str = "real") -> CrosstalkMatrix:
    """
    Uniform coupling matrix with t on the diagonal and r elsewhere.

    |t|² = 1 - (D-1)|r|². The matrix is used verbatim and is not exactly
    unitary: Gram off-diagonals are bounded by 2|t||r| + (D-2)|r|².

    Args:
        dim: Matrix dimension D
        r_magnitude: |r| >= 0
        convention: 'real' (t, r >= 0), 'imaginary' (r = i|r|) or
            'alternating' (r = ±|r| by the parity of row + column)

    Raises:
        DomainError: If (D-1)|r|² >= 1 or the convention is unknown
    """
    if convention not in UNIFORM_PHASE_CONVENTIONS:
        raise DomainError(f"unknown phase convention '{convention}'")
    if r_magnitude < 0 or (dim - 1) * r_magnitude ** 2 >= 1.0:
        raise DomainError(f"|r|={r_magnitude} too large for D={dim}: need (D-1)|r|^2 < 1")
    t = math.sqrt(1.0 - (dim - 1) * r_magnitude ** 2)
    if convention == "real":
        off = np.full((dim, dim), r_magnitude, dtype=np.complex128)
    elif convention == "imaginary":
        off = np.full((dim, dim), 1j * r_magnitude, dtype=np.complex128)
    else:
        rows, cols = np.indices((dim, dim))
        off = np.where((rows + cols) % 2 == 0, r_magnitude, -r_magnitude).astype(np.complex128)
    entries = off.copy()
    np.fill_diagonal(entries, t)
    return CrosstalkMatrix(entries, Provenance("uniform", {"r": r_magnitude, "phase_convention": convention}))


def scattering_probability(dim: int, r_magnitude: float) -> float:
    """P_scat = (D - 1)|r|²"""
    return (dim - 1) * r_magnitude ** 2


def nearest_unitary(matrix: CrosstalkMatrix) -> CrosstalkMatrix:
    """Unitary factor of the polar decomposition, used for sensitivity checks."""
    unitary, _ = polar(matrix.entries)
    details = dict(matrix.provenance.details)
    details["unitarized"] = True
    return CrosstalkMatrix(unitary, Provenance(matrix.provenance.kind, details))


def store_matrix(matrix: CrosstalkMatrix, path: Union[str, Path]) -> None:
    """
    Write a matrix with 17 significant digits per real number.

    A '.csv' suffix selects the CSV variant, anything else the plain text format.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = matrix.dim
    fmt = FLOAT_FORMAT.format
    with open(path, "w", encoding="utf-8", newline="") as f:
        if path.suffix.lower() == ".csv":
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for i in range(dim):
                for j in range(dim):
                    z = matrix.entries[i, j]
                    writer.writerow([i, j, fmt(z.real), fmt(z.imag)])
        else:
            f.write(f"D {dim}\n")
            for i in range(dim):
                for j in range(dim):
                    z = matrix.entries[i, j]
                    f.write(f"{i} {j} {fmt(z.real)} {fmt(z.imag)}\n")
    logger.debug(f"Stored {dim}x{dim} crosstalk matrix to {path}")


def _parse_records(lines: List[str], path: Path):
    header = lines[0].strip()
    if header.replace(" ", "").lower() == ",".join(CSV_HEADER):
        rows = list(csv.reader(lines[1:]))
        records = [r for r in rows if r and any(cell.strip() for cell in r)]
        count = len(records)
        dim = math.isqrt(count)
        if dim * dim != count or dim == 0:
            raise ParsingError(f"{path}: {count} entries do not form a square matrix")
        return dim, records
    parts = header.split()
    if len(parts) != 2 or parts[0] != "D":
        raise ParsingError(f"{path}: expected header 'D <integer>' or '{','.join(CSV_HEADER)}'")
    try:
        dim = int(parts[1])
    except ValueError:
        raise ParsingError(f"{path}: dimension '{parts[1]}' is not an integer") from None
    if dim < 1:
        raise ParsingError(f"{path}: dimension must be positive, got {dim}")
    records = [line.split() for line in lines[1:] if line.strip()]
    if len(records) != dim * dim:
        raise ParsingError(f"{path}: dimension mismatch, header D={dim} needs {dim * dim} rows, found {len(records)}")
    return dim, records


def load_matrix(path: Union[str, Path]) -> CrosstalkMatrix:
    """
    Read a matrix written by store_matrix or an equivalent measurement file.

    Non-unitary matrices are accepted (measured couplings include loss) and
    flagged in the provenance.

    Raises:
        ParsingError: On malformed content, dimension mismatch or non-square data
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [line for line in f.read().splitlines() if line.strip()]
    except OSError as e:
        raise ParsingError(f"Error reading crosstalk matrix file '{path}': {e}") from e
    if not lines:
        raise ParsingError(f"{path}: file is empty")
    dim, records = _parse_records(lines, path)
    entries = np.zeros((dim, dim), dtype=np.complex128)
    for position, record in enumerate(records):
        if len(record) != 4:
            raise ParsingError(f"{path}: entry {position} has {len(record)} fields, expected 4")
        try:
            row, col = int(record[0]), int(record[1])
            re, im = float(record[2]), float(record[3])
        except ValueError:
            raise ParsingError(f"{path}: entry {position} is not numeric: {record}") from None
        if (row, col) != divmod(position, dim):
            raise ParsingError(f"{path}: entry {position} is ({row}, {col}), expected row-major order")
        entries[row, col] = complex(re, im)
    deviation = float(np.max(np.abs(entries.conj().T @ entries - np.eye(dim))))
    non_unitary = deviation > LOADED_UNITARITY_TOL
    if non_unitary:
        logger.warning(f"Loaded matrix {path} is not unitary (deviation {deviation:.3e}); treating it as lossy")
    provenance = Provenance("loaded", {
        "path": str(path), "unitarity_deviation": deviation, "non_unitary": non_unitary,
    })
    return CrosstalkMatrix(entries, provenance)

"""
Constants module defining shared constants for demuxlimit.

This module centralizes the numerical floors, tolerances and defaults used
throughout the package, making maintenance and updates easier.
"""

import math

# Dimensionless half-separation x = d/(2w) below which the analytic x -> 0
# limit is used instead of evaluating removable 0/0 forms.
X_FLOOR = 1e-8

# Degenerate Fisher terms: (p, p') pairs below both thresholds contribute 0.
P_FLOOR = 1e-300
DP_FLOOR = 1e-150

# Quantum Fisher information in units of w^-2.
QUANTUM_FISHER = 1.0

# Quadrature
QUADRATURE_MARGIN = 8.0  # box half-width is x + 8 (units of w)
QUADRATURE_EPSABS = 1e-8
QUADRATURE_EPSREL = 1e-10
ORACLE_EPSABS = 1e-11

# Unitarity checks
UNITARITY_TOL = 1e-12
LOADED_UNITARITY_TOL = 1e-6

# Root solving (minimal resolvable distance)
SCAN_X_MIN = 1e-6
SCAN_X_MAX = 5.0
SCAN_POINTS = 400
SNR_TOL = 1e-9

# Scaling fits
MIN_FIT_POINTS = 5
MIN_FIT_DECADES = 2.0

# Calibration of the random-ensemble coupling strength
MU_MAX = math.pi
CALIBRATION_REL_TOL = 0.02
CALIBRATION_MAX_ITER = 60

# Maximum-likelihood search
MLE_X_MAX = 3.0
MLE_XTOL = 1e-7
MLE_GRID_POINTS = 200
MIN_RECOMMENDED_TRIALS = 100

# Ensemble defaults (the D=9 / 500-sample setting of the random crosstalk study)
DEFAULT_DIM = 9
DEFAULT_SAMPLES = 500
DEFAULT_Q_MEASURED = 1
DEFAULT_X_GRID = "1e-4:2.5:200:log"

SUPPORTED_MODELS = {"ideal", "uniform", "random", "file"}
SUPPORTED_FORMATS = {"csv", "json"}
UNIFORM_PHASE_CONVENTIONS = {"real", "imaginary", "alternating"}

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

# Files and environment
DEFAULT_CONFIG_FILE = "config.json"
DEFAULT_LOG_FILE = "demuxlimit.log"
DEFAULT_CACHE_FILE = "calibration_cache.json"
SEED_ENV_VAR = "DEMUXLIMIT_SEED"
THREADS_ENV_VAR = "DEMUXLIMIT_THREADS"
LOG_LEVEL_ENV_VAR = "DEMUXLIMIT_LOG_LEVEL"
DEFAULT_SEED = 20240101

# 17 significant digits round-trip binary64 exactly.
FLOAT_FORMAT = "{:.17g}"

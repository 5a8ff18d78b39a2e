"""
Exceptions module for demuxlimit.

This module defines custom exception classes and the mapping from
exceptions to command-line exit codes.
"""

from typing import Optional

from .constants import EXIT_CONFIG_ERROR, EXIT_NUMERICAL_ERROR


class DemuxLimitError(Exception):
    """Base exception class for all demuxlimit errors."""
    pass


class ConfigurationError(DemuxLimitError):
    """Exception raised for invalid run configurations or CLI flag combinations."""
    pass


class ParsingError(DemuxLimitError):
    """Exception raised when a crosstalk matrix file cannot be parsed."""
    pass


class DomainError(DemuxLimitError, ValueError):
    """Exception raised when a physical parameter lies outside its valid domain."""
    pass


class NumericalError(DemuxLimitError):
    """Exception raised when a numerical procedure fails."""
    pass


class QuadratureError(NumericalError):
    """Exception raised when adaptive quadrature misses its tolerance."""

    def __init__(self, message: str, achieved_error: float):
        super().__init__(f"{message} (achieved error estimate {achieved_error:.3e})")
        self.achieved_error = achieved_error


class SingularFisherTermError(NumericalError):
    """Exception raised for a vanishing probability with a non-negligible derivative."""

    def __init__(self, mode: int, p: float, dp: float):
        super().__init__(
            f"Singular Fisher term in mode {mode}: p={p:.3e}, dp/dx={dp:.3e}. "
            "The separation is too small for the floor or the matrix is pathological."
        )
        self.mode = mode
        self.p = p
        self.dp = dp


class RootNotFoundError(NumericalError):
    """Exception raised when a bracketed root cannot be refined."""
    pass


class CalibrationError(NumericalError):
    """Exception raised when a target crosstalk level is unreachable."""
    pass


class EstimationError(NumericalError):
    """Exception raised when a maximum-likelihood estimate is undefined."""

    def __init__(self, message: str, trial: Optional[int] = None):
        if trial is not None:
            message = f"trial {trial}: {message}"
        super().__init__(message)
        self.trial = trial


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the CLI exit code.

    Args:
        error: The exception that terminated a command

    Returns:
        2 for configuration and input problems, 3 for numerical failures
    """
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL_ERROR
    if isinstance(error, (ConfigurationError, ParsingError, DomainError, OSError)):
        return EXIT_CONFIG_ERROR
    return EXIT_NUMERICAL_ERROR

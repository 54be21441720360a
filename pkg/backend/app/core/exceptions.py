"""
Exception hierarchy shared by the library, the CLI and the HTTP API.
"""

from typing import Optional


class EmbezzleMeterError(Exception):
    """Base class for all embezzlemeter failures."""


class ValidationError(EmbezzleMeterError, ValueError):
    """Input failed validation (bad entries, weights, parameters)."""


class IndexOutOfRangeError(EmbezzleMeterError, IndexError):
    """Ky Fan index beyond the vector dimension."""


class DomainError(EmbezzleMeterError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedOperationError(EmbezzleMeterError):
    """Operation not available for the given input size or method."""


class InternalError(EmbezzleMeterError):
    """A solver reported a state that cannot occur for valid input."""


class ConvergenceError(EmbezzleMeterError):
    """Iterative routine stopped before meeting its tolerance."""

    def __init__(self, message: str, best_value: Optional[float] = None):
        super().__init__(message)
        self.best_value = best_value


# Exit codes used by the CLI
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3


def exit_code_for(error: Exception) -> int:
    if isinstance(error, (ConvergenceError, InternalError)):
        return EXIT_CONVERGENCE
    return EXIT_VALIDATION

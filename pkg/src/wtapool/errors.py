"""
Exception hierarchy for wtapool.

Each exception carries the process exit code the CLI maps it to.
"""


class WtaPoolError(Exception):
    """Base class for all wtapool errors."""
    exit_code = 1


class DomainError(WtaPoolError, ValueError):
    """Raised when an argument lies outside the domain of an operation."""
    exit_code = 2


class CapacityError(WtaPoolError):
    """Raised when an exact computation would exceed a configured bound."""
    exit_code = 3


class ConvergenceError(WtaPoolError):
    """Raised when too many solver runs fail to converge."""
    exit_code = 4

    def __init__(self, message: str, diagnostics: dict = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConsistencyError(WtaPoolError, RuntimeError):
    """Raised when an internal invariant is violated."""
    exit_code = 5

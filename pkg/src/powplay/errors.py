"""Exception types shared across the package.

The CLI maps these onto exit codes (validation 1, convergence 2, I/O 3), so
library code should raise one of them rather than bare ValueError/RuntimeError
whenever the failure belongs to one of those classes.
"""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class CapacityError(ValidationError):
    """Raised when a construction would exceed its configured size ceiling."""


class InfeasibleError(ValidationError):
    """Raised when no parameter value can satisfy a requested dominance condition."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative solve fails to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual

"""Exception types shared across the package."""


class LqglmError(Exception):
    """Base class for all package errors."""


class DomainError(LqglmError, ValueError):
    """An argument lies outside the mathematical domain of an operation.

    Carries optional context about which bound was violated and where.
    """

    def __init__(self, message, *, value=None, bound=None, index=None):
        super().__init__(message)
        self.value = value
        self.bound = bound
        self.index = index


class SingularMatrixError(LqglmError, ValueError):
    """A matrix required to be positive definite failed a Cholesky pivot.

    ``pivot`` is the 1-based index of the first non-positive pivot, as
    reported by the factorization.
    """

    def __init__(self, message, *, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class EvaluationError(LqglmError, ValueError):
    """A user-supplied function returned a non-finite value at ``probe``."""

    def __init__(self, message, *, probe=None):
        super().__init__(message)
        self.probe = probe


class BracketError(LqglmError, ValueError):
    """A one-dimensional optimum sits on the boundary of its bracket."""


class UsageError(LqglmError, ValueError):
    """Inconsistent arguments (mismatched fits, wrong shapes, bad config)."""


class DegenerateDirectionError(LqglmError, ValueError):
    """The added-variable direction is (numerically) in the span of X."""


class SelectionError(LqglmError, RuntimeError):
    """Too few grid fits converged for distortion-parameter selection."""

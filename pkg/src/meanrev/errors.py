"""Exception hierarchy shared across the package.

Every error raised by library code derives from MeanRevError so callers
(and the CLI exit-code mapping) can distinguish domain failures from bugs.
"""
from __future__ import annotations


class MeanRevError(Exception):
    """Base class for all domain errors."""


class InvalidMatrix(MeanRevError):
    """Matrix input is malformed (non-finite, non-square, or asymmetric)."""


class NotPositiveDefinite(MeanRevError):
    """A Cholesky pivot fell below the positive-definiteness threshold."""


class InvalidInput(MeanRevError):
    """Scalar or vector argument outside its documented domain."""


class InvalidIndexSet(MeanRevError):
    """Support set is empty, out of range, or has repeated indices."""


class ZeroVector(MeanRevError):
    """An operation that needs a nonzero vector received the zero vector."""


class ConvergenceFailure(MeanRevError):
    """An iterative routine hit its iteration cap.

    The ``best`` attribute carries the last iterate so callers can inspect
    or salvage it.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class Infeasible(MeanRevError):
    """No point satisfies the constraints (globally or on a given support)."""


class DualUnbounded(MeanRevError):
    """The scalar dual ascent diverged: the equality-form primal is infeasible."""


class DegenerateFace(MeanRevError):
    """Primal recovery found no usable direction on the optimal face.

    Carries the face basis for diagnostics; the caller may retry once with a
    wider null-space tolerance.
    """

    def __init__(self, message: str, basis=None):
        super().__init__(message)
        self.basis = basis


class IngestError(MeanRevError):
    """A price file cell failed to parse. Carries 1-based row/column."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class InsufficientData(MeanRevError):
    """Too few usable rows for the requested universe size."""


class EstimationError(MeanRevError):
    """Model matrices could not be estimated (flat or degenerate data)."""


class InvalidPrice(MeanRevError):
    """A price needed for spread computation is not strictly positive."""


class NoVolatility(MeanRevError):
    """The spread has zero standard deviation; band trading is undefined."""

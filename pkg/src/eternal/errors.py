"""Exception hierarchy.

Anything deriving from :class:`NumericalFailure` maps to CLI exit code 2.
"""

from __future__ import annotations


class EternalError(Exception):
    """Base class for all package errors."""


class GridError(EternalError, ValueError):
    """Malformed grid or grid function (bad shape, non-finite entries, mismatched grids)."""


class NumericalFailure(EternalError):
    """A solver could not produce a trustworthy result."""


class NewtonFailure(NumericalFailure):
    def __init__(self, message: str, last_iterate=None, residual_sup: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual_sup = residual_sup


class EigenSolveError(NumericalFailure):
    def __init__(self, message: str, s: float | None = None):
        super().__init__(message)
        self.s = s


class DegenerateDirection(EigenSolveError):
    """The linearized problem has only the trivial decaying solution at this strength."""


class BlowUp(NumericalFailure):
    def __init__(self, message: str, t: float | None = None, sup: float | None = None):
        super().__init__(message)
        self.t = t
        self.sup = sup


class AnchorUnreachable(NumericalFailure):
    pass


class CoverageError(NumericalFailure):
    """Not enough runs (or slices) cover the requested window."""

"""Eternal solutions of the forced reaction-diffusion equation u_t = u_xx - u**2 + phi(x).

Finite-difference equilibria, a perturbed equilibrium family, IMEX time stepping,
a Duhamel cross-check, invariant-set diagnostics and the anchor-matched run
sequence that approximates a heteroclinic orbit between the two equilibria.
"""

from .errors import (
    AnchorUnreachable,
    BlowUp,
    CoverageError,
    DegenerateDirection,
    EigenSolveError,
    EternalError,
    GridError,
    NewtonFailure,
    NumericalFailure,
)
from .grid import GridFunction, SpatialGrid

__all__ = [
    "AnchorUnreachable",
    "BlowUp",
    "CoverageError",
    "DegenerateDirection",
    "EigenSolveError",
    "EternalError",
    "GridError",
    "GridFunction",
    "NewtonFailure",
    "NumericalFailure",
    "SpatialGrid",
]

__version__ = "0.1.0"

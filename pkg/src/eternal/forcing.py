"""The forcing term, the compactly supported bump, and the perturbation direction
that bends the forcing downward into a one-parameter family.

The direction solves ``y'' - 2 f_minus y - s beta y = 0``: ``y`` is the principal
eigenvector of the Dirichlet operator ``D2 - 2 f_minus - s beta`` at the strength
``s`` where its principal eigenvalue is zero.  The family forcing is then
``phi_c = phi + c * psi`` with ``psi = -amplitude * s * beta * y <= 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal
from scipy.optimize import bisect

from .errors import DegenerateDirection, EigenSolveError, GridError
from .grid import GridFunction, SpatialGrid, sup_norm


@dataclass(frozen=True)
class ForcingParams:
    offset: float = 0.4
    width: float = 1.0

    def __post_init__(self) -> None:
        if not self.offset > 0 or not self.width > 0:
            raise ValueError(f"offset and width must be positive, got {self}")


def build_phi(params: ForcingParams, grid: SpatialGrid) -> GridFunction:
    x = grid.nodes
    w2 = params.width**2
    return GridFunction(grid, (x**2 / w2 - params.offset) * np.exp(-(x**2) / (2.0 * w2)))


def smoothstep(t: np.ndarray) -> np.ndarray:
    """Quintic smoothstep: 0 for t <= 0, 1 for t >= 1, C2 in between."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def build_bump(K: tuple[float, float], margin: float, grid: SpatialGrid) -> GridFunction:
    k_lo, k_hi = K
    if not k_lo < k_hi:
        raise GridError(f"empty bump interval {K}")
    if margin <= 0:
        raise GridError(f"margin must be positive, got {margin}")
    L = grid.half_width
    if k_lo - margin <= -L or k_hi + margin >= L:
        raise GridError(f"bump {K} with margin {margin} does not fit inside (-{L}, {L})")
    x = grid.nodes
    beta = smoothstep((x - (k_lo - margin)) / margin) * smoothstep(((k_hi + margin) - x) / margin)
    return GridFunction(grid, beta)


def negative_interval(f_minus: GridFunction) -> tuple[float, float]:
    """Interval where ``f_minus`` is negative, shrunk by one node on each side."""
    idx = np.flatnonzero(f_minus.values < 0)
    if idx.size < 3:
        raise EigenSolveError("f_minus is not negative on an interval of at least three nodes")
    if idx[-1] - idx[0] + 1 != idx.size:
        raise EigenSolveError("f_minus is negative on more than one interval")
    x = f_minus.grid.nodes
    return float(x[idx[0] + 1]), float(x[idx[-1] - 1])


def _operator_diagonals(f_minus: GridFunction, s: float, beta: GridFunction):
    # interior rows of D2 - 2 f_minus - s beta with homogeneous Dirichlet ends
    h = f_minus.grid.spacing
    d = -2.0 / h**2 - 2.0 * f_minus.values[1:-1] - s * beta.values[1:-1]
    e = np.full(d.size - 1, 1.0 / h**2)
    return d, e


def _embed(grid: SpatialGrid, interior: np.ndarray) -> GridFunction:
    y = np.zeros(grid.node_count)
    y[1:-1] = interior
    return GridFunction(grid, y)


def _orient(v: np.ndarray) -> np.ndarray:
    v = v / v[np.argmax(np.abs(v))]
    return v


def principal_eigenpair(f_minus: GridFunction, s: float, beta: GridFunction) -> tuple[float, GridFunction]:
    """Largest eigenvalue of ``D2 - 2 f_minus - s beta`` and its eigenvector (max value 1)."""
    d, e = _operator_diagonals(f_minus, s, beta)
    n = d.size
    try:
        w, v = eigh_tridiagonal(d, e, select="i", select_range=(n - 1, n - 1))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolveError(f"eigen-solver failed at s = {s}: {exc}", s=s) from exc
    return float(w[0]), _embed(f_minus.grid, _orient(v[:, 0]))


def principal_eigenvalue(f_minus: GridFunction, s: float, beta: GridFunction) -> float:
    d, e = _operator_diagonals(f_minus, s, beta)
    n = d.size
    return float(eigvalsh_tridiagonal(d, e, select="i", select_range=(n - 1, n - 1))[0])


def solve_direction(
    f_minus: GridFunction, s: float, beta: GridFunction, tol: float = 1e-6
) -> GridFunction:
    """Nontrivial decaying solution of ``y'' - 2 f_minus y - s beta y = 0``, normalized to max 1.

    Raises :class:`DegenerateDirection` when no eigenvalue lies within ``tol`` of zero,
    i.e. only ``y = 0`` solves the discrete problem at this strength.
    """
    if s < 0:
        raise ValueError(f"strength must be nonnegative, got {s}")
    d, e = _operator_diagonals(f_minus, s, beta)
    try:
        spectrum = eigvalsh_tridiagonal(d, e)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolveError(f"eigen-solver failed at s = {s}: {exc}", s=s) from exc
    i = int(np.argmin(np.abs(spectrum)))
    lam = float(spectrum[i])
    if abs(lam) > tol:
        raise DegenerateDirection(
            f"only the zero solution decays at s = {s}: nearest eigenvalue is {lam:.3e}", s=s
        )
    _, v = eigh_tridiagonal(d, e, select="i", select_range=(i, i))
    y = _orient(v[:, 0])
    if y.min() < -1e-12:
        raise EigenSolveError(f"eigenvector changes sign at s = {s} (min {y.min():.3e})", s=s)
    return _embed(f_minus.grid, np.clip(y, 0.0, None))


@dataclass(frozen=True, eq=False)
class PerturbationDirection:
    k_lo: float
    k_hi: float
    margin: float
    s: float
    beta: GridFunction
    y: GridFunction
    eigenvalue: float
    amplitude: float = 1.0

    @property
    def psi(self) -> GridFunction:
        return GridFunction(self.beta.grid, -self.amplitude * self.s * self.beta.values * self.y.values)

    def with_amplitude(self, amplitude: float) -> PerturbationDirection:
        if not amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {amplitude}")
        return replace(self, amplitude=float(amplitude))


def calibrate_strength(
    f_minus: GridFunction,
    beta: GridFunction,
    *,
    K: tuple[float, float] | None = None,
    margin: float = 1.0,
    xtol: float = 1e-13,
    max_widen: int = 20,
) -> PerturbationDirection:
    """Bisect for the strength where the principal eigenvalue crosses zero.

    The bracket starts at ``(0, 2 * sup|f_minus|]`` and is doubled until the
    principal eigenvalue is negative at its upper end.
    """
    lam0 = principal_eigenvalue(f_minus, 0.0, beta)
    if lam0 <= 0:
        raise EigenSolveError(
            f"principal eigenvalue at s = 0 is {lam0:.3e}; f_minus is not linearly unstable", s=0.0
        )
    hi = 2.0 * sup_norm(f_minus)
    for _ in range(max_widen):
        if principal_eigenvalue(f_minus, hi, beta) < 0:
            break
        hi *= 2.0
    else:
        raise EigenSolveError(f"no zero crossing of the principal eigenvalue up to s = {hi}", s=hi)
    s = bisect(lambda t: principal_eigenvalue(f_minus, t, beta), 0.0, hi, xtol=xtol, maxiter=500)
    lam, y = principal_eigenpair(f_minus, s, beta)
    if y.values.min() < 0:
        raise EigenSolveError(f"principal eigenvector changes sign at s = {s}", s=s)
    if K is None:
        K = negative_interval(f_minus)
    return PerturbationDirection(
        k_lo=K[0], k_hi=K[1], margin=margin, s=float(s), beta=beta, y=y, eigenvalue=lam
    )


def direction_for(f_minus: GridFunction, margin: float = 1.0) -> PerturbationDirection:
    """Bump on the negative set of ``f_minus`` plus calibrated strength."""
    K = negative_interval(f_minus)
    beta = build_bump(K, margin, f_minus.grid)
    return calibrate_strength(f_minus, beta, K=K, margin=margin)


def phi_c(phi: GridFunction, psi: GridFunction, c: float) -> GridFunction:
    if not 0.0 <= c < 1.0:
        raise ValueError(f"family parameter must lie in [0, 1), got {c}")
    return phi + c * psi


def save_direction(direction: PerturbationDirection, stem: str | Path) -> None:
    stem = Path(stem)
    x = direction.beta.grid.nodes
    cols = np.column_stack([x, direction.beta.values, direction.y.values, direction.psi.values])
    np.savetxt(stem.with_suffix(".csv"), cols, delimiter=",", header="x,beta,y,psi",
               comments="", fmt="%.17g")
    meta = {
        "s": direction.s,
        "k_lo": direction.k_lo,
        "k_hi": direction.k_hi,
        "margin": direction.margin,
        "amplitude": direction.amplitude,
        "eigenvalue_residual": abs(direction.eigenvalue),
    }
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_direction(stem: str | Path, grid: SpatialGrid) -> PerturbationDirection:
    stem = Path(stem)
    data = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(stem.with_suffix(".json").read_text())
    return PerturbationDirection(
        k_lo=meta["k_lo"],
        k_hi=meta["k_hi"],
        margin=meta["margin"],
        s=meta["s"],
        beta=GridFunction(grid, data[:, 1]),
        y=GridFunction(grid, data[:, 2]),
        eigenvalue=meta["eigenvalue_residual"],
        amplitude=meta.get("amplitude", 1.0),
    )

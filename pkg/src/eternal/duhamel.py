"""Heat kernel, truncated-domain convolution, and the Duhamel reconstruction

    u(t) = H(t) * U + int_0^t H(t - s) * (phi - u(s)**2) ds

evaluated from the stored slices of a trajectory.  This is an independent
route to ``u(t)``: it shares no code with the time stepper.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import erfc

from .errors import CoverageError, GridError
from .evolve import Trajectory
from .grid import GridFunction, SpatialGrid

MIN_SLICES = 10


def heat_kernel(t: float, x):
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    return np.exp(-np.square(x) / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)


def min_resolved_time(grid: SpatialGrid) -> float:
    """Smallest ``t`` with kernel width ``sqrt(4t)`` at least two grid spacings."""
    return grid.spacing**2


def _resolved(t: float, grid: SpatialGrid) -> bool:
    return np.sqrt(4.0 * t) >= 2.0 * grid.spacing * (1.0 - 1e-12)


@dataclass(frozen=True, eq=False)
class KernelEval:
    t: float
    profile: GridFunction

    @property
    def mass(self) -> float:
        return float(trapezoid(self.profile.values, dx=self.profile.grid.spacing))


def kernel_eval(t: float, grid: SpatialGrid) -> KernelEval:
    """``H(t, x)`` sampled on the grid (centered at the origin)."""
    return KernelEval(t, GridFunction(grid, heat_kernel(t, grid.nodes)))


def kernel_mass(t: float, grid: SpatialGrid) -> float:
    return kernel_eval(t, grid).mass


def missed_mass(t: float, grid: SpatialGrid) -> np.ndarray:
    """Kernel mass of ``H(t, x_i - .)`` lying outside ``[-L, L]``, per node."""
    x = grid.nodes
    L = grid.half_width
    s = 2.0 * np.sqrt(t)
    return 0.5 * erfc((L - x) / s) + 0.5 * erfc((L + x) / s)


def _convolve_values(v: np.ndarray, t: float, grid: SpatialGrid) -> np.ndarray:
    n = grid.node_count
    h = grid.spacing
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    offsets = h * np.arange(-(n - 1), n)
    k = heat_kernel(t, offsets)
    return np.convolve(w * v, k, mode="full")[n - 1 : 2 * n - 1]


def heat_convolve(f: GridFunction, t: float) -> GridFunction:
    """Trapezoid quadrature of ``int_{-L}^{L} H(t, x - y) f(y) dy`` at every node."""
    if not _resolved(t, f.grid):
        raise GridError(
            f"kernel unresolved at t = {t}: need t >= {min_resolved_time(f.grid):.3g} on this grid"
        )
    return GridFunction(f.grid, _convolve_values(f.values, t, f.grid))


def truncation_estimate(f: GridFunction, t: float) -> float:
    """Mass ignored beyond +-L, assuming ``f`` keeps its boundary magnitude outside."""
    edge = max(abs(f.values[0]), abs(f.values[-1]))
    return float(np.max(missed_mass(t, f.grid)) * edge)


def duhamel_reconstruct(trajectory: Trajectory, phi: GridFunction, t: float) -> GridFunction:
    """Right side of the integral equation at time ``t`` from stored slices.

    Time quadrature is the trapezoid rule on the stored slice times in ``[0, t]``.
    Where the kernel ``H(t - s)`` is too narrow for the grid (including ``s = t``)
    it is replaced by its delta limit, i.e. the integrand is ``phi - u(s)**2``.
    When the last stored slice is before ``t`` the remaining interval contributes
    ``(t - s_last) * (phi - u(s_last)**2)``.
    """
    grid = trajectory.grid
    if not _resolved(t, grid):
        raise GridError(f"t = {t} is below the kernel resolution limit {min_resolved_time(grid):.3g}")
    eps = 1e-9 * max(1.0, t)
    if abs(trajectory.times[0]) > eps:
        raise CoverageError("trajectory must start at s = 0")
    sel = np.flatnonzero(trajectory.times <= t + eps)
    if sel.size < MIN_SLICES:
        raise CoverageError(
            f"only {sel.size} stored slices in [0, {t}]; need at least {MIN_SLICES} for time quadrature"
        )
    s = trajectory.times[sel]
    U = trajectory.values[0]
    first = _convolve_values(U, t, grid)
    integrand = np.empty((sel.size, grid.node_count))
    for row, (i, si) in enumerate(zip(sel, s)):
        src = phi.values - trajectory.values[i] ** 2
        lag = t - si
        integrand[row] = _convolve_values(src, lag, grid) if _resolved(lag, grid) else src
    duhamel = trapezoid(integrand, x=s, axis=0)
    if t - s[-1] > eps:
        duhamel = duhamel + (t - s[-1]) * (phi.values - trajectory.values[sel[-1]] ** 2)
    return GridFunction(grid, first + duhamel)


@dataclass(frozen=True)
class DuhamelReport:
    t: float
    sup_discrepancy: float
    l1_discrepancy: float
    slices_used: int
    truncation_estimate: float
    interior_half_width: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def interior_mask(grid: SpatialGrid, t: float, missed: float = 1e-10) -> np.ndarray:
    """Nodes whose kernel at time ``t`` loses less than ``missed`` mass to truncation."""
    return missed_mass(t, grid) < missed


def duhamel_check(trajectory: Trajectory, phi: GridFunction, t: float) -> tuple[GridFunction, DuhamelReport]:
    """Compare the reconstruction with the stepper's slice at ``t`` on the kernel-interior nodes."""
    recon = duhamel_reconstruct(trajectory, phi, t)
    stepper = trajectory.at(t)
    grid = trajectory.grid
    mask = interior_mask(grid, t)
    diff = np.abs(recon.values - stepper.values)[mask]
    x_in = grid.nodes[mask]
    trunc = max(truncation_estimate(trajectory.slice(i), t) for i in range(len(trajectory))
                if trajectory.times[i] <= t + 1e-9)
    report = DuhamelReport(
        t=float(t),
        sup_discrepancy=float(diff.max()),
        l1_discrepancy=float(trapezoid(diff, x=x_in)),
        slices_used=int(np.count_nonzero(trajectory.times <= t + 1e-9)),
        truncation_estimate=trunc,
        interior_half_width=float(x_in.max()),
    )
    return recon, report


def save_report(report: DuhamelReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json())

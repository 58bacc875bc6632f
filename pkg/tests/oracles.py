"""Independent reference computations shared by unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from eternal.evolve import SchemeConfig, evolve
from eternal.grid import SpatialGrid


def ode_solution(u0: float, t):
    """Exact solution of u' = -u**2 (spatially constant data, zero forcing)."""
    return u0 / (1.0 + u0 * np.asarray(t))


def ode_center_error(u0: float, dt: float, t_end: float = 1.0, grid: SpatialGrid | None = None) -> float:
    """Centre-node error of the stepper against the scalar ODE.

    On [-30, 30] the Dirichlet ends cannot influence x = 0 by t = 1 beyond
    rounding, so the centre node follows the ODE.
    """
    grid = grid or SpatialGrid()
    zero = grid.constant(0.0)
    traj = evolve(grid.constant(u0), zero, SchemeConfig(dt=dt, t_max=t_end, store_stride=10**9),
                  stop_at_steady=False)
    assert abs(traj.times[-1] - t_end) < 1e-9
    return abs(traj.values[-1, grid.center_index] - ode_solution(u0, t_end))


def observed_orders(dts, errors) -> np.ndarray:
    dts, errors = np.asarray(dts, float), np.asarray(errors, float)
    return np.log(errors[:-1] / errors[1:]) / np.log(dts[:-1] / dts[1:])


def gaussian_heat(t: float, x):
    """Heat flow of exp(-x**2/2): variance 1 + 2t, amplitude (1 + 2t)**-1/2."""
    return np.exp(-np.square(x) / (2.0 * (1.0 + 2.0 * t))) / np.sqrt(1.0 + 2.0 * t)

"""Forward Cauchy problem for ``u_t = u_xx - u**2 + phi``.

Time stepping is an IMEX theta-scheme: diffusion is theta-implicit (one
tridiagonal solve per stage, factorized once per run), the reaction is explicit.
A Heun corrector stage makes the reaction trapezoidal as well, so with
``theta = 0.5`` the step is second order in ``dt``.  Boundary nodes are held at
``6/L**2``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import BlowUp, GridError
from .grid import GridFunction, SpatialGrid, first_difference_array, second_difference_array

DT_GUARD = 0.25


@dataclass(frozen=True)
class SchemeConfig:
    dt: float = 1e-3
    theta: float = 0.5
    t_max: float = 50.0
    store_stride: int = 100
    steady_tol: float = 1e-7
    blowup_threshold: float = 1e6

    def __post_init__(self) -> None:
        if not 0 < self.dt <= DT_GUARD:
            raise ValueError(f"dt must lie in (0, {DT_GUARD}], got {self.dt}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if int(self.store_stride) != self.store_stride or self.store_stride < 1:
            raise ValueError(f"store_stride must be a positive integer, got {self.store_stride}")
        if not self.steady_tol > 0 or not self.blowup_threshold > 0:
            raise ValueError("steady_tol and blowup_threshold must be positive")


class Termination(str, enum.Enum):
    REACHED_T_MAX = "reached_t_max"
    STEADY_STATE = "steady_state"
    BLOW_UP = "blow_up"


@dataclass(frozen=True)
class TrajectorySlice:
    t: float
    u: GridFunction


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stored slices of one Cauchy problem: ``values[i]`` is ``u(times[i], .)``."""

    grid: SpatialGrid
    times: np.ndarray
    values: np.ndarray
    scheme: SchemeConfig
    termination: Termination
    termination_time: float

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.times), self.grid.node_count):
            raise GridError(f"values shape {self.values.shape} does not match times/grid")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise GridError("slice times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise GridError("trajectory contains non-finite values")
        self.times.setflags(write=False)
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.times)

    def slice(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.values[i])

    @property
    def slices(self) -> list[TrajectorySlice]:
        return [TrajectorySlice(float(t), self.slice(i)) for i, t in enumerate(self.times)]

    @property
    def final(self) -> GridFunction:
        return self.slice(-1)

    def index_of_time(self, t: float, atol: float | None = None) -> int:
        atol = 0.5 * self.scheme.dt if atol is None else atol
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol:
            raise KeyError(f"no stored slice at t = {t}")
        return i

    def at(self, t: float) -> GridFunction:
        return self.slice(self.index_of_time(t))

    def shifted(self, offset: float, times: np.ndarray | None = None) -> Trajectory:
        """Same slices with ``offset`` added to every time (or explicit new ``times``)."""
        new_times = self.times + offset if times is None else np.asarray(times, dtype=float)
        return Trajectory(self.grid, new_times.copy(), self.values.copy(), self.scheme,
                          self.termination, self.termination_time + offset)

    def restricted(self, t_lo: float, t_hi: float) -> Trajectory:
        eps = 1e-9 * max(1.0, abs(t_lo), abs(t_hi))
        m = (self.times >= t_lo - eps) & (self.times <= t_hi + eps)
        return Trajectory(self.grid, self.times[m].copy(), self.values[m].copy(), self.scheme,
                          self.termination, self.termination_time)


@numba.njit(cache=True)
def _thomas_factor(n, r):
    # rows 0 and n-1 are identity rows; interior rows are (-r, 1 + 2r, -r)
    cp = np.zeros(n)
    den = np.ones(n)
    for i in range(1, n - 1):
        den[i] = (1.0 + 2.0 * r) + r * cp[i - 1]
        cp[i] = -r / den[i]
    return cp, den


@numba.njit(cache=True)
def _thomas_solve(cp, den, r, b):
    # b has shape (n, m): one right-hand side per column
    n, m = b.shape
    x = np.empty_like(b)
    d = np.empty_like(b)
    d[0, :] = b[0, :]
    for i in range(1, n - 1):
        inv = 1.0 / den[i]
        for j in range(m):
            d[i, j] = (b[i, j] + r * d[i - 1, j]) * inv
    x[n - 1, :] = b[n - 1, :]
    for i in range(n - 2, 0, -1):
        c = cp[i]
        for j in range(m):
            x[i, j] = d[i, j] - c * x[i + 1, j]
    x[0, :] = d[0, :]
    return x


@numba.njit(cache=True)
def _imex_columns(u, phi, dt, theta, h, bval, cp, den, r):
    # predictor: trapezoid-split diffusion, explicit reaction; corrector: Heun on the reaction
    n, m = u.shape
    ih2 = 1.0 / (h * h)
    explicit = np.empty_like(u)
    react0 = np.empty_like(u)
    rhs = np.empty_like(u)
    for i in range(1, n - 1):
        for j in range(m):
            d2 = (u[i - 1, j] - 2.0 * u[i, j] + u[i + 1, j]) * ih2
            explicit[i, j] = u[i, j] + dt * (1.0 - theta) * d2
            react0[i, j] = phi[i] - u[i, j] * u[i, j]
            rhs[i, j] = explicit[i, j] + dt * react0[i, j]
    rhs[0, :] = bval
    rhs[n - 1, :] = bval
    pred = _thomas_solve(cp, den, r, rhs)
    for i in range(1, n - 1):
        for j in range(m):
            rhs[i, j] = explicit[i, j] + 0.5 * dt * (react0[i, j] + phi[i] - pred[i, j] * pred[i, j])
    return _thomas_solve(cp, den, r, rhs)


@numba.njit(cache=True)
def _rhs_sup_columns(u, phi, h):
    n, m = u.shape
    ih2 = 1.0 / (h * h)
    out = np.zeros(m)
    for i in range(1, n - 1):
        for j in range(m):
            v = abs((u[i - 1, j] - 2.0 * u[i, j] + u[i + 1, j]) * ih2 - u[i, j] * u[i, j] + phi[i])
            if v > out[j]:
                out[j] = v
    return out


class ImexStepper:
    """Factorized IMEX stepper for one grid, forcing and time step.

    :meth:`advance` takes a state of shape ``(N,)`` or a batch ``(m, N)``;
    :meth:`advance_columns` works on ``(N, m)`` arrays without transposing.
    """

    def __init__(self, phi: GridFunction, dt: float, theta: float = 0.5,
                 boundary_value: float | None = None):
        self.grid = phi.grid
        self.phi = np.ascontiguousarray(phi.values)
        self.dt = float(dt)
        self.theta = float(theta)
        self.h = self.grid.spacing
        self.boundary = self.grid.tail_value if boundary_value is None else float(boundary_value)
        self._r = self.theta * self.dt / self.h**2
        self._cp, self._den = _thomas_factor(self.grid.node_count, self._r)

    def residual_sup_columns(self, u: np.ndarray) -> np.ndarray:
        """Per-column sup over interior nodes of ``D2 u - u**2 + phi``."""
        return _rhs_sup_columns(u, self.phi, self.h)

    def advance_columns(self, u: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            return _imex_columns(u, self.phi, self.dt, self.theta, self.h, self.boundary,
                                 self._cp, self._den, self._r)

    def advance(self, u: np.ndarray) -> np.ndarray:
        cols = np.ascontiguousarray(np.atleast_2d(u).T)
        out = self.advance_columns(cols).T
        return out[0].copy() if u.ndim == 1 else out.copy()


def step(u: GridFunction, phi: GridFunction, scheme: SchemeConfig) -> GridFunction:
    """One IMEX step.  Raises :class:`BlowUp` when the new state exceeds the threshold."""
    new = ImexStepper(phi, scheme.dt, scheme.theta).advance(u.values)
    peak = float(np.max(np.abs(new))) if np.all(np.isfinite(new)) else np.inf
    if peak > scheme.blowup_threshold:
        raise BlowUp(f"sup|u| = {peak:.3e} exceeds {scheme.blowup_threshold:.3e}", sup=peak)
    return GridFunction(u.grid, new)


def _check_initial(U: GridFunction) -> None:
    h = U.grid.spacing
    d1 = first_difference_array(U.values, h)
    d2 = second_difference_array(U.values, h)
    if not (np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
        raise GridError("initial condition has unbounded discrete derivatives")


def march(
    initial: list[GridFunction],
    phi: GridFunction,
    scheme: SchemeConfig,
    *,
    t_max: float | None = None,
    lead: float = 0.0,
    store_phase: int = 0,
    stop_at_steady: bool = True,
) -> list[Trajectory]:
    """Evolve a batch of initial conditions in lockstep.

    Own-clock times are ``0`` followed by ``lead + n*dt`` (a nonzero ``lead`` is a
    first partial step).  A state is stored when ``(n - store_phase) % stride == 0``,
    plus the initial and final states.  Each member terminates independently.
    """
    for U in initial:
        _check_initial(U)
    grid = phi.grid
    t_max = scheme.t_max if t_max is None else float(t_max)
    stride = int(scheme.store_stride)
    stepper = ImexStepper(phi, scheme.dt, scheme.theta)
    lead_stepper = ImexStepper(phi, lead, scheme.theta) if lead > 0 else None

    m = len(initial)
    state = np.array([U.values for U in initial], dtype=float).T.copy()  # (N, m)
    times: list[list[float]] = [[0.0] for _ in range(m)]
    stored: list[list[np.ndarray]] = [[state[:, j].copy()] for j in range(m)]
    termination = [Termination.REACHED_T_MAX] * m
    term_time = [t_max] * m
    active = np.ones(m, dtype=bool)

    def store(j: int, t: float) -> None:
        if times[j][-1] < t:
            times[j].append(t)
            stored[j].append(state[:, j].copy())

    def check_steady(t: float) -> None:
        idx = np.flatnonzero(active)
        if not stop_at_steady or idx.size == 0:
            return
        res = stepper.residual_sup_columns(np.ascontiguousarray(state[:, idx]))
        for j in idx[res < scheme.steady_tol]:
            termination[j] = Termination.STEADY_STATE
            term_time[j] = t
            active[j] = False
            store(j, t)

    check_steady(0.0)
    n = -1 if lead_stepper is not None else 0
    t_now = 0.0
    tiny = 1e-9 * scheme.dt
    while active.any():
        if n < 0:
            t_new, mover = lead, lead_stepper
        else:
            t_new, mover = lead + (n + 1) * scheme.dt, stepper
        if t_new > t_max + tiny:
            break
        idx = np.flatnonzero(active)
        new = mover.advance_columns(np.ascontiguousarray(state[:, idx]) if idx.size < m else state)
        with np.errstate(invalid="ignore"):
            peak = np.max(np.abs(new), axis=0)
        blown = ~(peak <= scheme.blowup_threshold)  # NaN counts as blown
        for j in idx[blown]:
            termination[j] = Termination.BLOW_UP
            term_time[j] = t_new
            active[j] = False
        ok = idx[~blown]
        if ok.size == m:
            state = new
        else:
            state[:, ok] = new[:, ~blown]
        n += 1
        t_now = t_new
        if (n - store_phase) % stride == 0:
            for j in ok:
                store(j, t_new)
        if abs(t_new - t_max) <= tiny:
            break
        check_steady(t_new)

    out = []
    for j in range(m):
        if termination[j] is Termination.REACHED_T_MAX:
            store(j, t_now)
            term_time[j] = t_now
        out.append(Trajectory(grid, np.array(times[j]), np.array(stored[j]), scheme,
                              termination[j], float(term_time[j])))
    return out


def evolve(U: GridFunction, phi: GridFunction, scheme: SchemeConfig, **kwargs) -> Trajectory:
    return march([U], phi, scheme, **kwargs)[0]


def evolve_many(initial: list[GridFunction], phi: GridFunction, scheme: SchemeConfig,
                **kwargs) -> list[Trajectory]:
    return march(list(initial), phi, scheme, **kwargs)


def save_trajectory(traj: Trajectory, stem: str | Path) -> None:
    stem = Path(stem)
    x = traj.grid.nodes
    with open(stem.with_suffix(".csv"), "w") as fh:
        fh.write("t,x,u\n")
        for t, row in zip(traj.times, traj.values):
            fh.writelines(f"{t:.17g},{xi:.17g},{ui:.17g}\n" for xi, ui in zip(x, row))
    meta = {
        "dt": traj.scheme.dt,
        "theta": traj.scheme.theta,
        "termination": traj.termination.value,
        "termination_time": traj.termination_time,
        "slice_count": len(traj),
    }
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

"""Checks of the invariant sets, derivative bounds and action along trajectories.

Gap checks run over interior nodes only: every field here shares the Dirichlet
value ``6/L**2`` at the two boundary nodes, where all gaps are identically zero.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .equilibria import EquilibriumPair
from .evolve import Trajectory
from .grid import GridFunction, first_difference_array, second_difference_array


def action(u: GridFunction, phi: GridFunction) -> float:
    """``int 1/2 u_x**2 + 1/3 u**3 - u phi dx`` by the trapezoid rule."""
    return float(_action_rows(u.values[None, :], phi.values, u.grid.spacing)[0])


def _action_rows(values: np.ndarray, phi: np.ndarray, h: float) -> np.ndarray:
    ux = first_difference_array(values, h)
    density = 0.5 * ux**2 + values**3 / 3.0 - values * phi
    return trapezoid(density, dx=h, axis=-1)


# -- funnels -----------------------------------------------------------------

@dataclass
class FunnelReport:
    min_gap_lower: float
    min_gap_upper: float
    first_violation: tuple[float, float, str] | None
    passed: bool
    strict: bool
    slack: float
    times: np.ndarray = field(repr=False)
    slice_gap_lower: np.ndarray = field(repr=False)
    slice_gap_upper: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "min_gap_lower": self.min_gap_lower,
            "min_gap_upper": self.min_gap_upper,
            "first_violation": list(self.first_violation) if self.first_violation else None,
            "passed": self.passed,
            "strict": self.strict,
            "slack": self.slack,
        }

    def write_gaps_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "gap_lower", "gap_upper"])
            for row in zip(self.times, self.slice_gap_lower, self.slice_gap_upper):
                w.writerow([f"{v:.17g}" for v in row])


def check_funnel(
    trajectory: Trajectory, lower: GridFunction, upper: GridFunction, slack: float = 1e-10
) -> FunnelReport:
    """Scan every stored slice for ``lower <= u <= upper`` (up to ``slack``).

    ``passed`` uses the slack; ``strict`` asks for positive gaps on both sides.
    """
    vals = trajectory.values[:, 1:-1]
    gl = vals - lower.values[1:-1]
    gu = upper.values[1:-1] - vals
    slice_lo = gl.min(axis=1)
    slice_hi = gu.min(axis=1)
    violation = None
    bad = np.flatnonzero((slice_lo <= -slack) | (slice_hi <= -slack))
    if bad.size:
        i = int(bad[0])
        if slice_lo[i] <= -slack:
            j, side = int(np.argmin(gl[i])), "lower"
        else:
            j, side = int(np.argmin(gu[i])), "upper"
        violation = (float(trajectory.times[i]), float(trajectory.grid.nodes[j + 1]), side)
    lo, hi = float(slice_lo.min()), float(slice_hi.min())
    return FunnelReport(
        min_gap_lower=lo,
        min_gap_upper=hi,
        first_violation=violation,
        passed=violation is None,
        strict=lo > 0 and hi > 0,
        slack=slack,
        times=trajectory.times.copy(),
        slice_gap_lower=slice_lo,
        slice_gap_upper=slice_hi,
    )


def random_between(
    lower: GridFunction, upper: GridFunction, rng: np.random.Generator,
    lam_range: tuple[float, float] = (0.1, 0.9), modes: int = 4,
) -> GridFunction:
    """``lam(x) lower + (1 - lam(x)) upper`` with a smooth random ``lam`` in ``lam_range``."""
    grid = lower.grid
    x = grid.nodes
    L = grid.half_width
    lo, hi = lam_range
    freqs = rng.uniform(0.05, 1.0, size=modes)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=modes)
    amps = rng.normal(0.0, 1.0, size=modes)
    centre = rng.uniform(-0.5 * L, 0.5 * L)
    z = (amps[:, None] * np.cos(freqs[:, None] * (x - centre) + phases[:, None])).sum(axis=0)
    lam = lo + (hi - lo) / (1.0 + np.exp(-z))
    return GridFunction(grid, lam * lower.values + (1.0 - lam) * upper.values)


def random_funnel_initial(
    pair: EquilibriumPair, rng: np.random.Generator, lam_range: tuple[float, float] = (0.1, 0.9),
    modes: int = 4,
) -> GridFunction:
    """Random smooth field strictly inside the funnel between ``f_minus`` and ``f_plus``."""
    return random_between(pair.f_minus.f, pair.f_plus.f, rng, lam_range, modes)


@dataclass(frozen=True)
class BandReport:
    band_width: float
    min_distance: float
    passed: bool


def nested_funnel_check(trajectory: Trajectory, f_minus: GridFunction, g_c: GridFunction) -> BandReport:
    """Trajectory started in ``W_c`` must keep ``sup|u - f_minus| > sup|g_c - f_minus| / 2``."""
    width = 0.5 * float(np.max(np.abs(g_c.values - f_minus.values)))
    dist = np.max(np.abs(trajectory.values - f_minus.values), axis=1)
    d = float(dist.min())
    return BandReport(band_width=width, min_distance=d, passed=d > width)


# -- derivatives -------------------------------------------------------------

@dataclass(frozen=True)
class SliceDerivatives:
    t: float
    sup_u: float
    sup_ux: float
    sup_uxx: float
    sharp_bound_ok: bool


@dataclass
class DerivativeReport:
    records: list[SliceDerivatives]
    sup_u: float
    sup_ux: float
    sup_uxx: float
    sharp_bound_ok: bool
    t_uniform: float
    uxx_at_t_uniform: float
    uxx_late_max: float
    envelope_ok: bool
    envelope_rtol: float
    argmax_time: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("records")
        d["slices"] = len(self.records)
        return d


def derivative_suprema(values: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row suprema of ``|u|``, ``|u_x|`` and ``|u_xx|`` for a ``(slices, N)`` array."""
    values = np.atleast_2d(values)
    return (
        np.max(np.abs(values), axis=1),
        np.max(np.abs(first_difference_array(values, h)), axis=1),
        np.max(np.abs(second_difference_array(values, h)), axis=1),
    )


def derivative_report(
    trajectory: Trajectory,
    t_uniform: float = 1.0,
    bound_tol: float = 1e-8,
    envelope_rtol: float = 0.01,
) -> DerivativeReport:
    """Measured derivative suprema per slice.

    Two checks: the interpolation inequality ``|u_x| <= sqrt(2 |u| |u_xx|)`` per
    slice, and uniform-in-time boundedness of ``|u_xx|`` after ``t_uniform``: no
    later slice exceeds the value at ``t_uniform`` by more than ``envelope_rtol``.
    """
    su, sux, suxx = derivative_suprema(trajectory.values, trajectory.grid.spacing)
    ok = sux <= np.sqrt(2.0 * su * suxx) + bound_tol
    records = [
        SliceDerivatives(float(t), float(a), float(b), float(c), bool(o))
        for t, a, b, c, o in zip(trajectory.times, su, sux, suxx, ok)
    ]
    late = trajectory.times >= t_uniform - 1e-9
    if late.any():
        i0 = int(np.flatnonzero(late)[0])
        ref = float(suxx[i0])
        late_max = float(suxx[late].max())
    else:
        ref = late_max = float(suxx[-1])
    return DerivativeReport(
        records=records,
        sup_u=float(su.max()),
        sup_ux=float(sux.max()),
        sup_uxx=float(suxx.max()),
        sharp_bound_ok=bool(ok.all()),
        t_uniform=float(t_uniform),
        uxx_at_t_uniform=ref,
        uxx_late_max=late_max,
        envelope_ok=late_max <= (1.0 + envelope_rtol) * ref,
        envelope_rtol=envelope_rtol,
        argmax_time=float(trajectory.times[int(np.argmax(suxx))]),
    )


# -- action ------------------------------------------------------------------

@dataclass
class ActionSeries:
    times: np.ndarray
    values: np.ndarray
    max_increase: float

    @property
    def bound(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_dict(self) -> dict:
        return {
            "max_increase": self.max_increase,
            "bound": self.bound,
            "first": float(self.values[0]),
            "last": float(self.values[-1]),
            "count": int(self.values.size),
        }


def action_series(trajectory: Trajectory, phi: GridFunction) -> ActionSeries:
    vals = _action_rows(trajectory.values, phi.values, trajectory.grid.spacing)
    inc = float(np.max(np.diff(vals))) if vals.size > 1 else 0.0
    return ActionSeries(trajectory.times.copy(), vals, inc)


def write_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

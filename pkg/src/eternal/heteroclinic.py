"""Limiting sequence of Cauchy problems that approximates the heteroclinic orbit.

Run ``k`` starts from ``U_k = (1 - c_k) g_{c_k} + c_k f_plus`` with ``c_k = 2**-(k+1)``
and is shifted in time so that its centre value passes through a common anchor
value at ``t = 0``.  Deeper runs start closer to ``f_minus`` and therefore earlier.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .equilibria import EquilibriumPair, Family
from .errors import AnchorUnreachable, BlowUp, CoverageError
from .evolve import ImexStepper, SchemeConfig, Trajectory, march, save_trajectory
from .grid import GridFunction, second_difference_array

log = logging.getLogger(__name__)


def family_parameter(k: int) -> float:
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    return 2.0 ** (-k - 1)


def build_initial(k: int, pair: EquilibriumPair, family: Family) -> GridFunction:
    c = family_parameter(k)
    try:
        g = family.member(c).g.f
    except KeyError as exc:
        raise KeyError(f"family has no member for c_{k} = {c}") from exc
    return (1.0 - c) * g + c * pair.f_plus.f


@dataclass(frozen=True, eq=False)
class HeteroclinicRun:
    k: int
    c_k: float
    U_k: GridFunction
    sigma_k: float
    trajectory: Trajectory
    anchor_error: float
    multiple_crossings: bool

    @property
    def T_k(self) -> float:
        return -self.sigma_k


def _first_crossing(U: GridFunction, a_star: float, phi: GridFunction, scheme: SchemeConfig) -> float:
    ic = U.grid.center_index
    u = U.values.copy()
    if u[ic] >= a_star:
        if math.isclose(u[ic], a_star, rel_tol=0.0, abs_tol=1e-14):
            return 0.0
        raise ValueError(f"anchor {a_star} is not above the initial centre value {u[ic]}")
    stepper = ImexStepper(phi, scheme.dt, scheme.theta)
    cols = u[:, None].copy()
    n = 0
    while (n + 1) * scheme.dt <= scheme.t_max + 1e-9 * scheme.dt:
        if stepper.residual_sup_columns(cols)[0] < scheme.steady_tol:
            raise AnchorUnreachable(
                f"steady state at t = {n * scheme.dt:.4g} with centre value {cols[ic, 0]:.6g} "
                f"below the anchor {a_star:.6g}"
            )
        new = stepper.advance_columns(cols)
        peak = float(np.max(np.abs(new)))
        if not peak <= scheme.blowup_threshold:
            raise BlowUp(f"blow-up at t = {(n + 1) * scheme.dt:.4g} before reaching the anchor",
                         t=(n + 1) * scheme.dt, sup=peak)
        prev, cur = cols[ic, 0], new[ic, 0]
        cols = new
        n += 1
        if prev < a_star <= cur:
            return (n - 1) * scheme.dt + scheme.dt * (a_star - prev) / (cur - prev)
    raise AnchorUnreachable(f"anchor {a_star:.6g} not crossed by t_max = {scheme.t_max}")


def match_anchor(
    U_k: GridFunction,
    a_star: float,
    phi: GridFunction,
    scheme: SchemeConfig,
    t_after: float = 0.0,
) -> tuple[float, Trajectory, float, bool]:
    """Locate the first upward crossing of the centre value through ``a_star``.

    A first pass steps until the crossing and refines it by linear interpolation.
    The second pass re-runs with a partial first step so that shifted slice times
    fall exactly on the lattice ``j*dt``, and continues ``t_after`` past the
    anchor.  Returns ``(sigma, shifted trajectory, anchor error, multiple crossings)``.
    """
    dt = scheme.dt
    sigma = _first_crossing(U_k, a_star, phi, scheme)
    M = int(math.floor(sigma / dt + 1e-9))
    lead = sigma - M * dt
    if lead < 1e-9 * dt:
        lead = 0.0
    stride = int(scheme.store_stride)
    traj = march([U_k], phi, scheme, t_max=sigma + t_after + 1e-9 * dt, lead=lead,
                 store_phase=M % stride, stop_at_steady=False)[0]
    own = traj.times
    shifted = np.where(own > 0, dt * (np.rint((own - lead) / dt) - M), -sigma)
    traj = traj.shifted(-sigma, times=shifted)
    centre = traj.values[:, U_k.grid.center_index] - a_star
    i0 = int(np.argmin(np.abs(traj.times)))
    anchor_error = abs(float(centre[i0])) if abs(traj.times[i0]) < 0.5 * dt else math.inf
    signs = np.sign(centre[np.abs(centre) > 0])
    crossings = int(np.count_nonzero(np.diff(signs) != 0))
    return sigma, traj, anchor_error, crossings > 1


def run_sequence(
    pair: EquilibriumPair,
    family: Family,
    scheme: SchemeConfig,
    k_max: int,
    t_after: float,
) -> tuple[float, list[HeteroclinicRun]]:
    """Build and anchor runs ``k = 0..k_max``; the anchor is run 0's own initial centre value."""
    U0 = build_initial(0, pair, family)
    a_star = U0.center
    runs = []
    for k in range(k_max + 1):
        U = U0 if k == 0 else build_initial(k, pair, family)
        sigma, traj, err, multi = match_anchor(U, a_star, pair.phi, scheme, t_after=t_after)
        if multi:
            log.warning("run %d: centre value crosses the anchor more than once", k)
        runs.append(HeteroclinicRun(k, family_parameter(k), U, sigma, traj, err, multi))
    return a_star, runs


@dataclass
class HeteroclinicBundle:
    anchor_value: float
    runs: list[HeteroclinicRun]
    window: tuple[float, float, float, float]
    deltas: list[tuple[int, float]]
    covering: list[int]
    limit_estimate: Trajectory
    limit_k: int
    extra: dict = field(default_factory=dict)

    @property
    def T(self) -> np.ndarray:
        return np.array([r.T_k for r in self.runs])

    @property
    def T_strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.T) < 0))

    @property
    def delta_values(self) -> np.ndarray:
        return np.array([d for _, d in self.deltas])

    def run(self, k: int) -> HeteroclinicRun:
        for r in self.runs:
            if r.k == k:
                return r
        raise KeyError(k)


def _lattice(traj: Trajectory, t_lo: float, t_hi: float) -> dict[int, int]:
    dt = traj.scheme.dt
    j = np.rint(traj.times / dt).astype(np.int64)
    on = np.abs(traj.times - j * dt) < 1e-6 * dt
    keep = on & (traj.times >= t_lo - 1e-9) & (traj.times <= t_hi + 1e-9)
    return {int(a): int(i) for a, i in zip(j[keep], np.flatnonzero(keep))}


def covers(run: HeteroclinicRun, t_lo: float, t_hi: float) -> bool:
    tr = run.trajectory
    return run.T_k <= t_lo + 1e-9 and tr.times[-1] >= t_hi - 1e-9


def window_delta(a: Trajectory, b: Trajectory, window) -> float:
    """Sup of ``|a - b|`` over common lattice times and nodes inside the window."""
    t_lo, t_hi, x_lo, x_hi = window
    la, lb = _lattice(a, t_lo, t_hi), _lattice(b, t_lo, t_hi)
    common = sorted(set(la) & set(lb))
    if not common:
        raise CoverageError("runs share no lattice times inside the window")
    x = a.grid.nodes
    xm = (x >= x_lo - 1e-12) & (x <= x_hi + 1e-12)
    ia = [la[j] for j in common]
    ib = [lb[j] for j in common]
    return float(np.max(np.abs(a.values[ia][:, xm] - b.values[ib][:, xm])))


def assemble(runs: list[HeteroclinicRun], window, a_star: float | None = None) -> HeteroclinicBundle:
    """Consecutive-run deltas on the window and the deepest covering run as the limit.

    Runs that start after ``t_lo`` (``T_k > t_lo``) do not cover the window and are
    left out of the deltas.
    """
    t_lo, t_hi, x_lo, x_hi = window
    if not (t_lo < t_hi and x_lo < x_hi):
        raise ValueError(f"degenerate window {window}")
    cov = [r for r in runs if covers(r, t_lo, t_hi)]
    if len(cov) < 2:
        raise CoverageError(
            f"window t in [{t_lo}, {t_hi}] is covered by {len(cov)} run(s); need at least two "
            f"(start times T_k = {[round(r.T_k, 4) for r in runs]})"
        )
    deltas = []
    for a, b in zip(cov, cov[1:]):
        if b.k == a.k + 1:
            deltas.append((a.k, window_delta(a.trajectory, b.trajectory, window)))
    deepest = cov[-1]
    if a_star is None:
        a_star = runs[0].U_k.center
    return HeteroclinicBundle(
        anchor_value=float(a_star),
        runs=list(runs),
        window=tuple(float(v) for v in window),
        deltas=deltas,
        covering=[r.k for r in cov],
        limit_estimate=deepest.trajectory.restricted(t_lo, t_hi),
        limit_k=deepest.k,
    )


def pde_residual(trajectory: Trajectory, phi: GridFunction, x_window: tuple[float, float]) -> float:
    """Sup of ``u_t - u_xx + u**2 - phi`` on interior slices and window nodes.

    ``u_t`` is the central difference across neighbouring stored slices, which
    must be equally spaced in time.
    """
    t = trajectory.times
    if len(t) < 3:
        raise CoverageError("need at least three slices for a time derivative")
    gaps = np.diff(t)
    if not np.allclose(gaps, gaps[0], rtol=1e-6, atol=0.0):
        raise ValueError("stored slices are not equally spaced in time")
    v = trajectory.values
    ut = (v[2:] - v[:-2]) / (t[2:] - t[:-2])[:, None]
    mid = v[1:-1]
    res = ut - second_difference_array(mid, trajectory.grid.spacing) + mid**2 - phi.values
    x = trajectory.grid.nodes
    xm = (x >= x_window[0]) & (x <= x_window[1])
    xm[0] = xm[-1] = False
    return float(np.max(np.abs(res[:, xm])))


def verify_not_equilibrium(bundle: HeteroclinicBundle, pair: EquilibriumPair, tol: float = 1e-6) -> bool:
    """True iff the anchor value is separated from both equilibria at x = 0 by more than ``tol``."""
    lo, hi = pair.f_minus.f.center, pair.f_plus.f.center
    if tol >= abs(hi - lo):
        log.warning("tolerance %.3g cannot resolve f_plus(0) - f_minus(0) = %.3g", tol, hi - lo)
        return False
    a = bundle.anchor_value
    return bool(abs(a - lo) > tol and abs(a - hi) > tol)


def bundle_summary(bundle: HeteroclinicBundle) -> dict:
    return {
        "a_star": bundle.anchor_value,
        "runs": [
            {
                "k": r.k,
                "c_k": r.c_k,
                "sigma_k": r.sigma_k,
                "T_k": r.T_k,
                "termination": r.trajectory.termination.value,
                "anchor_error": r.anchor_error,
                "multiple_crossings": r.multiple_crossings,
            }
            for r in bundle.runs
        ],
        "deltas": [{"k": k, "delta": d} for k, d in bundle.deltas],
        "covering": bundle.covering,
        "limit_k": bundle.limit_k,
        "window": list(bundle.window),
        **bundle.extra,
    }


def save_bundle(bundle: HeteroclinicBundle, outdir: str | Path) -> list[str]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    names = []
    for r in bundle.runs:
        stem = outdir / f"run_{r.k:02d}"
        save_trajectory(r.trajectory, stem)
        names += [stem.name + ".csv", stem.name + ".json"]
    (outdir / "bundle.json").write_text(json.dumps(bundle_summary(bundle), indent=2, sort_keys=True) + "\n")
    return names + ["bundle.json"]

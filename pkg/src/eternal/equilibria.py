"""Stationary solutions of ``0 = f'' - f**2 + phi`` on the truncated grid.

All stationary solves pin both boundary values to ``6/L**2``, the common tail of
the two equilibria.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal, solve_banded

from .errors import NewtonFailure, NumericalFailure
from .forcing import PerturbationDirection, phi_c
from .grid import (
    GridFunction,
    first_difference,
    read_csv,
    second_difference,
    second_difference_array,
    sup_norm,
    write_csv,
)

log = logging.getLogger(__name__)


def stationary_residual(f: GridFunction, phi: GridFunction) -> np.ndarray:
    """Discrete ``D2 f - f**2 + phi`` on interior nodes, zero on the Dirichlet nodes."""
    r = second_difference_array(f.values, f.grid.spacing) - f.values**2 + phi.values
    r[0] = r[-1] = 0.0
    return r


def tail_error(f: GridFunction, fraction: float = 2.0 / 3.0) -> float:
    """Max relative deviation from ``6/x**2`` over ``|x| in [fraction*L, L]``."""
    x = f.grid.nodes
    mask = np.abs(x) >= fraction * f.grid.half_width
    ref = 6.0 / x[mask] ** 2
    return float(np.max(np.abs(f.values[mask] - ref) / ref))


@dataclass(frozen=True, eq=False)
class Equilibrium:
    f: GridFunction
    residual_sup: float
    newton_iters: int

    @property
    def tail_error(self) -> float:
        return tail_error(self.f)

    def derivative_suprema(self) -> tuple[float, float]:
        return sup_norm(first_difference(self.f)), sup_norm(second_difference(self.f))


def newton_equilibrium(
    phi: GridFunction,
    guess: GridFunction,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> Equilibrium:
    """Damped Newton on ``R(f) = D2 f - f**2 + phi`` with Armijo backtracking.

    The full step is tried first and halved until the residual 2-norm decreases
    sufficiently.  Five consecutive steps that fail to decrease the residual count
    as divergence.
    """
    grid = phi.grid
    h = grid.spacing
    n = grid.node_count
    f = guess.values.copy()
    f[0] = f[-1] = grid.tail_value

    def residual(v: np.ndarray) -> np.ndarray:
        r = second_difference_array(v, h) - v**2 + phi.values
        r[0] = r[-1] = 0.0
        return r

    r = residual(f)
    rsup = float(np.max(np.abs(r)))
    growth = 0
    ab = np.zeros((3, n))
    for it in range(max_iter + 1):
        if rsup < tol:
            return Equilibrium(GridFunction(grid, f), rsup, it)
        if it == max_iter:
            break
        ab[0, 2:] = 1.0 / h**2
        ab[2, :-2] = 1.0 / h**2
        ab[1, 1:-1] = -2.0 / h**2 - 2.0 * f[1:-1]
        ab[1, 0] = ab[1, -1] = 1.0
        try:
            step = solve_banded((1, 1), ab, -r)
            step[0] = step[-1] = 0.0
        except np.linalg.LinAlgError as exc:
            raise NewtonFailure(f"singular Jacobian at iteration {it}", f.copy(), rsup) from exc
        if not np.all(np.isfinite(step)):
            raise NewtonFailure(f"singular Jacobian at iteration {it}", f.copy(), rsup)
        norm0 = np.linalg.norm(r)
        lam = 1.0
        while True:
            trial = f + lam * step
            r_trial = residual(trial)
            norm1 = np.linalg.norm(r_trial)
            if norm1 <= (1.0 - 1e-4 * lam) * norm0 or lam < 2.0**-20:
                break
            lam *= 0.5
        growth = growth + 1 if norm1 >= norm0 else 0
        f, r = trial, r_trial
        rsup = float(np.max(np.abs(r)))
        if growth >= 5 or not np.isfinite(rsup):
            raise NewtonFailure(f"Newton diverged at iteration {it + 1}", f.copy(), rsup)
    raise NewtonFailure(f"no convergence in {max_iter} iterations (residual {rsup:.3e})", f.copy(), rsup)


@dataclass(frozen=True, eq=False)
class EquilibriumPair:
    f_minus: Equilibrium
    f_plus: Equilibrium
    phi: GridFunction

    @property
    def min_gap(self) -> float:
        """Minimum of ``f_plus - f_minus`` over interior nodes (the two share the Dirichlet ends)."""
        return float(np.min((self.f_plus.f.values - self.f_minus.f.values)[1:-1]))

    @property
    def sup_gap(self) -> float:
        return sup_norm(self.f_plus.f - self.f_minus.f)


def default_seeds(grid) -> dict[str, GridFunction]:
    """Fixed multi-start guesses for :func:`find_pair`."""
    x = grid.nodes
    hump = np.exp(-(x**2) / 4.0)
    return {
        "positive_hump": GridFunction(grid, 0.6 * hump),
        "negative_hump": GridFunction(grid, -0.8 * hump + 6.0 / (x**2 + 16.0)),
        "wide_negative_hump": GridFunction(grid, -0.5 * np.exp(-(x**2) / 8.0) + 6.0 / (x**2 + 16.0)),
        "tail": GridFunction(grid, 6.0 / (x**2 + 4.0)),
        "deep_negative_hump": GridFunction(grid, -1.2 * np.exp(-(x**2) / 2.0) + 6.0 / (x**2 + 16.0)),
    }


def find_pair(
    phi: GridFunction,
    seeds: dict[str, GridFunction] | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    dedup_tol: float = 1e-6,
) -> EquilibriumPair:
    """Multi-start Newton; returns the pointwise-ordered pair of distinct solutions with the largest gap."""
    if seeds is None:
        seeds = default_seeds(phi.grid)
    found: list[Equilibrium] = []
    for name, guess in seeds.items():
        try:
            eq = newton_equilibrium(phi, guess, tol=tol, max_iter=max_iter)
        except NewtonFailure as exc:
            log.debug("seed %s failed: %s", name, exc)
            continue
        if all(sup_norm(eq.f - other.f) > dedup_tol for other in found):
            found.append(eq)
    best = None
    for a in found:
        for b in found:
            if a is b:
                continue
            gap = (b.f.values - a.f.values)[1:-1]
            if gap.min() > 0 and (best is None or gap.max() > best[2]):
                best = (a, b, gap.max())
    if best is None:
        raise NumericalFailure(
            f"found {len(found)} distinct equilibria, need two that are pointwise ordered"
        )
    return EquilibriumPair(f_minus=best[0], f_plus=best[1], phi=phi)


@dataclass(frozen=True, eq=False)
class FamilyMember:
    c: float
    phi_c: GridFunction
    g: Equilibrium


@dataclass
class Family:
    """Members of the ``g_c`` family in ascending ``c``.  ``truncated_at`` is set when
    continuation failed before reaching every requested parameter."""

    members: list[FamilyMember]
    direction: PerturbationDirection
    truncated_at: float | None = None
    reason: str = ""
    _by_c: dict[float, FamilyMember] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._by_c = {m.c: m for m in self.members}

    def member(self, c: float) -> FamilyMember:
        for key, m in self._by_c.items():
            if abs(key - c) <= 1e-14:
                return m
        raise KeyError(f"no family member with c = {c}")

    def __contains__(self, c: float) -> bool:
        return any(abs(key - c) <= 1e-14 for key in self._by_c)

    def monotonicity(self) -> list[dict]:
        """For consecutive members (b < a): min and max of ``g_a - g_b`` over interior nodes."""
        rows = []
        for lo, hi in zip(self.members, self.members[1:]):
            d = (hi.g.f.values - lo.g.f.values)[1:-1]
            rows.append({
                "c_low": lo.c,
                "c_high": hi.c,
                "min_diff": float(d.min()),
                "max_diff": float(d.max()),
                "strict_everywhere": bool(d.min() > 0),
                "ordered": bool(d.min() >= 0 and d.max() > 0),
            })
        return rows


def _continue(pair, direction, start: FamilyMember, c_target: float, max_step: float, tol: float):
    g, c = start.g, start.c
    while c < c_target:
        c_next = min(c_target, c + max_step)
        phic = phi_c(pair.phi, direction.psi, c_next)
        g = newton_equilibrium(phic, g.f, tol=tol)
        c = c_next
    return FamilyMember(c_target, phi_c(pair.phi, direction.psi, c_target), g)


def solve_family(
    pair: EquilibriumPair,
    direction: PerturbationDirection,
    c_values,
    tol: float = 1e-10,
    max_step: float = 0.02,
) -> Family:
    """Natural-parameter continuation of ``g_c`` from ``g_0 = f_minus``.

    Intermediate parameters are inserted so no Newton solve jumps by more than
    ``max_step``; only the requested parameters are kept.
    """
    cs = sorted(float(c) for c in c_values)
    if not cs or cs[0] != 0.0:
        cs = [0.0] + cs
    member = FamilyMember(0.0, pair.phi, pair.f_minus)
    members = [member]
    for c in cs[1:]:
        if c == member.c:
            continue
        try:
            member = _continue(pair, direction, member, c, max_step, tol)
        except NewtonFailure as exc:
            log.warning("family continuation stopped at c = %g: %s", c, exc)
            return Family(members, direction, truncated_at=c, reason=str(exc))
        members.append(member)
    return Family(members, direction)


def jacobian_principal_eigenvalue(f: GridFunction) -> float:
    """Largest eigenvalue of the stationary Jacobian ``D2 - 2 f`` (Dirichlet ends)."""
    h = f.grid.spacing
    d = -2.0 / h**2 - 2.0 * f.values[1:-1]
    e = np.full(d.size - 1, 1.0 / h**2)
    n = d.size
    return float(eigvalsh_tridiagonal(d, e, select="i", select_range=(n - 1, n - 1))[0])


def locate_fold(
    pair: EquilibriumPair,
    direction: PerturbationDirection,
    step: float = 0.01,
    c_limit: float = 50.0,
    tol: float = 1e-10,
) -> float:
    """Estimate the fold of the ``g_c`` branch for the given direction.

    Tracks the Jacobian's principal eigenvalue ``lam(c)`` along the branch; near a
    fold ``lam**2`` is affine in ``c``, which is extrapolated to zero from the last
    two accepted points.
    """
    history = [(0.0, jacobian_principal_eigenvalue(pair.f_minus.f))]
    if history[0][1] <= 0:
        raise NumericalFailure("f_minus Jacobian has no positive eigenvalue; no fold to locate")
    g = pair.f_minus
    c = 0.0
    while c < c_limit:
        c_next = c + step
        try:
            g = newton_equilibrium(pair.phi + c_next * direction.psi, g.f, tol=tol)
        except NewtonFailure:
            break
        lam = jacobian_principal_eigenvalue(g.f)
        if lam <= 0:
            break
        history.append((c_next, lam))
        c = c_next
    else:
        raise NumericalFailure(f"no fold found up to c = {c_limit}")
    if len(history) < 2:
        return step
    (c1, l1), (c2, l2) = history[-2], history[-1]
    return c2 + l2**2 * (c2 - c1) / (l1**2 - l2**2)


def fit_family_amplitude(
    pair: EquilibriumPair, direction: PerturbationDirection, fold_at: float = 1.5
) -> PerturbationDirection:
    """Rescale the direction so the family's fold sits at ``c = fold_at`` (beyond [0, 1))."""
    unit = direction.with_amplitude(1.0)
    c_fold = locate_fold(pair, unit)
    return unit.with_amplitude(c_fold / fold_at)


def save_equilibrium(eq: Equilibrium, stem: str | Path) -> None:
    stem = Path(stem)
    write_csv(stem.with_suffix(".csv"), eq.f)
    meta = {"residual_sup": eq.residual_sup, "newton_iters": eq.newton_iters, "tail_error": eq.tail_error}
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_equilibrium(stem: str | Path, grid=None) -> Equilibrium:
    stem = Path(stem)
    f = read_csv(stem.with_suffix(".csv"), grid)
    meta = json.loads(stem.with_suffix(".json").read_text())
    return Equilibrium(f, meta["residual_sup"], meta["newton_iters"])

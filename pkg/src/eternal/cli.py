"""Command-line front end.

Every command writes its artifacts plus a ``manifest.json`` into the output
directory.  The manifest holds only config-derived data and results (no
timestamps or timings), so repeated runs with one config produce identical files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, duhamel, heteroclinic
from .config import ConfigError, RunConfig, load_config
from .equilibria import (
    EquilibriumPair,
    Family,
    find_pair,
    fit_family_amplitude,
    save_equilibrium,
    solve_family,
)
from .errors import NumericalFailure
from .evolve import Termination, evolve, evolve_many, save_trajectory
from .forcing import build_phi, direction_for, save_direction
from .grid import GridFunction, read_csv, write_csv

log = logging.getLogger("eternal")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3
INITIAL_CHOICES = ("f-minus", "f-plus", "midpoint", "below")


class Outputs:
    """Output directory plus the list of artifacts written into it."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.root / name

    def json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def add(self, names) -> None:
        self.artifacts.extend(names)


# -- shared pipeline pieces ---------------------------------------------------

def _pair(cfg: RunConfig) -> EquilibriumPair:
    phi = build_phi(cfg.forcing_params(), cfg.spatial_grid())
    return find_pair(phi, tol=cfg.tolerances.newton_tol)


def _family(cfg: RunConfig, pair: EquilibriumPair, c_values) -> Family:
    direction = fit_family_amplitude(pair, direction_for(pair.f_minus.f, cfg.family.margin),
                                     fold_at=cfg.family.fold_at)
    return solve_family(pair, direction, sorted(set(c_values)), tol=cfg.tolerances.newton_tol)


def _rng(cfg: RunConfig) -> np.random.Generator:
    return np.random.default_rng(cfg.seed)


# -- commands -----------------------------------------------------------------

def cmd_equilibria(cfg: RunConfig, out: Outputs, args) -> dict[str, bool]:
    pair = _pair(cfg)
    save_equilibrium(pair.f_minus, out.root / "f_minus")
    save_equilibrium(pair.f_plus, out.root / "f_plus")
    out.add(["f_minus.csv", "f_minus.json", "f_plus.csv", "f_plus.json"])
    tails = {"f_minus": pair.f_minus.tail_error, "f_plus": pair.f_plus.tail_error}
    out.json("equilibria_report.json", {
        "min_gap": pair.min_gap,
        "sup_gap": pair.sup_gap,
        "residual_sup": {"f_minus": pair.f_minus.residual_sup, "f_plus": pair.f_plus.residual_sup},
        "tail_error": tails,
        "tail_tol": cfg.tolerances.tail_tol,
    })
    print(f"min_gap = {pair.min_gap:.6g}")
    print(f"tail_error f_minus = {tails['f_minus']:.4g}, f_plus = {tails['f_plus']:.4g}")
    return {
        "residual": max(pair.f_minus.residual_sup, pair.f_plus.residual_sup) < 1e-8,
        "ordered": pair.min_gap > 0,
        "tail_f_minus": tails["f_minus"] < cfg.tolerances.tail_tol,
        "tail_f_plus": tails["f_plus"] < cfg.tolerances.tail_tol,
    }


def cmd_family(cfg: RunConfig, out: Outputs, args) -> dict[str, bool]:
    pair = _pair(cfg)
    family = _family(cfg, pair, cfg.family.c_list)
    save_direction(family.direction, out.root / "direction")
    out.add(["direction.csv", "direction.json"])
    for m in family.members:
        name = f"g_c{m.c:.6f}"
        save_equilibrium(m.g, out.root / name)
        out.add([name + ".csv", name + ".json"])
    rows = family.monotonicity()
    out.json("family_report.json", {
        "c_values": [m.c for m in family.members],
        "truncated_at": family.truncated_at,
        "reason": family.reason,
        "amplitude": family.direction.amplitude,
        "monotonicity": rows,
    })
    g0 = family.member(0.0).g.f.values if 0.0 in family else None
    checks = {
        "complete": family.truncated_at is None,
        "residual": all(m.g.residual_sup < 1e-8 for m in family.members),
        "monotone": all(r["ordered"] for r in rows),
    }
    if g0 is not None:
        checks["g0_is_f_minus"] = float(np.max(np.abs(g0 - pair.f_minus.f.values))) < 1e-7
    return checks


def _initial(choice: str, pair: EquilibriumPair) -> GridFunction:
    fm, fp = pair.f_minus.f, pair.f_plus.f
    if choice == "f-minus":
        return fm
    if choice == "f-plus":
        return fp
    if choice == "midpoint":
        return 0.5 * (fm + fp)
    if choice == "below":
        dip = fm.grid.sample(lambda x: np.exp(-x**2) * (1.0 - (x / fm.grid.half_width) ** 2))
        return fm - 0.5 * dip
    return read_csv(choice, fm.grid)


def cmd_evolve(cfg: RunConfig, out: Outputs, args) -> dict[str, bool]:
    pair = _pair(cfg)
    U = _initial(args.initial, pair)
    traj = evolve(U, pair.phi, cfg.scheme_config())
    save_trajectory(traj, out.root / "trajectory")
    out.add(["trajectory.csv", "trajectory.json"])
    acts = analysis.action_series(traj, pair.phi)
    deriv = analysis.derivative_report(traj)
    out.json("action_report.json", acts.to_dict())
    out.json("derivative_report.json", deriv.to_dict())
    checks = {"sharp_bound": deriv.sharp_bound_ok}
    if traj.termination is not Termination.BLOW_UP:
        checks["action_descent"] = acts.max_increase <= 1e-6
    inner = U.values[1:-1]
    if np.all(inner > pair.f_minus.f.values[1:-1]) and np.all(inner < pair.f_plus.f.values[1:-1]):
        fr = analysis.check_funnel(traj, pair.f_minus.f, pair.f_plus.f, cfg.tolerances.funnel_slack)
        fr.write_gaps_csv(out.path("funnel_gaps.csv"))
        out.json("funnel_report.json", fr.to_dict())
        checks["funnel"] = fr.passed
    print(f"termination = {traj.termination.value} at t = {traj.termination_time:.6g}")
    return checks


def cmd_duhamel_check(cfg: RunConfig, out: Outputs, args) -> dict[str, bool]:
    pair = _pair(cfg)
    t = cfg.invariants.duhamel_t
    U = analysis.random_funnel_initial(pair, _rng(cfg))
    scheme = cfg.scheme_config(store_stride=cfg.invariants.duhamel_stride)
    traj = evolve(U, pair.phi, scheme, t_max=t, stop_at_steady=False)
    recon, report = duhamel.duhamel_check(traj, pair.phi, t)
    duhamel.save_report(report, out.path("duhamel_report.json"))
    write_csv(out.path("duhamel_reconstruction.csv"), recon)
    grid = pair.phi.grid
    masses = [(float(s), duhamel.kernel_mass(float(s), grid)) for s in np.geomspace(0.1, 10.0, 21)]
    out.json("kernel_mass.json", [{"t": s, "mass": m} for s, m in masses])
    print(f"sup discrepancy at t = {t}: {report.sup_discrepancy:.3g}")
    return {
        "discrepancy": report.sup_discrepancy < 1e-3,
        "kernel_mass": all(abs(m - 1.0) < 1e-6 for _, m in masses),
    }


def cmd_heteroclinic(cfg: RunConfig, out: Outputs, args) -> dict[str, bool]:
    pair = _pair(cfg)
    het = cfg.heteroclinic
    cks = [heteroclinic.family_parameter(k) for k in range(het.k_max + 1)]
    family = _family(cfg, pair, [0.0, *cks])
    scheme = cfg.scheme_config()
    t_lo, t_hi, x_lo, x_hi = het.window
    a_star, runs = heteroclinic.run_sequence(pair, family, scheme, het.k_max, t_after=t_hi)
    bundle = heteroclinic.assemble(runs, het.window, a_star)
    limit = bundle.limit_estimate
    residual = heteroclinic.pde_residual(limit, pair.phi, (x_lo, x_hi))
    bound = 10.0 * (scheme.dt + pair.phi.grid.spacing**2)
    fm, fp = pair.f_minus.f.values, pair.f_plus.f.values
    deepest = bundle.run(bundle.limit_k).trajectory
    funnel_ok = all(
        analysis.check_funnel(r.trajectory, pair.f_minus.f, pair.f_plus.f, cfg.tolerances.funnel_slack).passed
        for r in runs
    )
    d = bundle.delta_values
    bundle.extra.update({
        "pde_residual": residual,
        "pde_residual_bound": bound,
        "distance_f_plus_at_t_hi": float(np.max(np.abs(limit.values[-1] - fp))),
        "distance_f_minus_at_earliest": float(np.max(np.abs(deepest.values[0] - fm))),
        "sup_gap": pair.sup_gap,
    })
    out.add([str(Path("bundle") / n) for n in heteroclinic.save_bundle(bundle, out.root / "bundle")])
    print(f"T_k = {np.round(bundle.T, 4).tolist()}")
    print(f"deltas = {[f'{v:.3g}' for v in d]}, pde residual = {residual:.3g}")
    return {
        "T_strictly_decreasing": bundle.T_strictly_decreasing,
        "deltas_last_three_decreasing": d.size >= 3 and bool(np.all(np.diff(d[-3:]) < 0)),
        "pde_residual": residual < bound,
        "anchor_matched": all(r.anchor_error < cfg.tolerances.anchor_tol for r in runs),
        "funnel": funnel_ok,
        "not_equilibrium": heteroclinic.verify_not_equilibrium(bundle, pair, cfg.tolerances.anchor_tol),
    }


def cmd_invariants(cfg: RunConfig, out: Outputs, args) -> dict[str, bool]:
    pair = _pair(cfg)
    rng = _rng(cfg)
    inv = cfg.invariants
    initial = [analysis.random_funnel_initial(pair, rng) for _ in range(inv.samples)]
    trajs = evolve_many(initial, pair.phi, cfg.scheme_config(), t_max=inv.t_max)
    rows = []
    for i, tr in enumerate(trajs):
        fr = analysis.check_funnel(tr, pair.f_minus.f, pair.f_plus.f, cfg.tolerances.funnel_slack)
        dr = analysis.derivative_report(tr)
        ac = analysis.action_series(tr, pair.phi)
        rows.append({
            "sample": i,
            "termination": tr.termination.value,
            "funnel": fr.passed,
            "min_gap_lower": fr.min_gap_lower,
            "min_gap_upper": fr.min_gap_upper,
            "sharp_bound": dr.sharp_bound_ok,
            "uxx_envelope": dr.envelope_ok,
            "action_max_increase": ac.max_increase,
        })
    out.json("invariants_report.json", rows)
    return {
        "funnel": all(r["funnel"] for r in rows),
        "sharp_bound": all(r["sharp_bound"] for r in rows),
        "uxx_envelope": all(r["uxx_envelope"] for r in rows),
        "action_descent": all(r["action_max_increase"] <= 1e-6 for r in rows),
    }


COMMANDS = {
    "equilibria": cmd_equilibria,
    "family": cmd_family,
    "evolve": cmd_evolve,
    "duhamel-check": cmd_duhamel_check,
    "heteroclinic": cmd_heteroclinic,
    "invariants": cmd_invariants,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'section.key = value' config file (defaults if omitted)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--dry-run", action="store_true", help="validate and echo the config only")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="eternal", description="Eternal solutions of u_t = u_xx - u^2 + phi")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "evolve":
            p.add_argument("--initial", default="midpoint",
                           help=f"one of {', '.join(INITIAL_CHOICES)} or a CSV path with header x,value")
    return parser


def write_manifest(out: Outputs, command: str, cfg: RunConfig, invariants: dict[str, bool],
                   error: str | None = None) -> None:
    manifest = {
        "command": command,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "artifacts": sorted(out.artifacts),
        "invariants": {k: ("pass" if v else "fail") for k, v in sorted(invariants.items())},
    }
    if error is not None:
        manifest["error"] = error
    (out.root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.command == "evolve" and args.initial not in INITIAL_CHOICES and not Path(args.initial).is_file():
            raise ConfigError(f"--initial: no such choice or file: {args.initial}")
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.dry_run:
        sys.stdout.write(cfg.to_text())
        print(f"# config ok, hash {cfg.hash()}")
        return EXIT_OK

    out = Outputs(args.out or cfg.output_dir)
    (out.root / "config.cfg").write_text(cfg.to_text())
    out.add(["config.cfg"])
    try:
        invariants = COMMANDS[args.command](cfg, out, args)
    except NumericalFailure as exc:
        write_manifest(out, args.command, cfg, {}, error=f"{type(exc).__name__}: {exc}")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_manifest(out, args.command, cfg, invariants)
    for name, ok in sorted(invariants.items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(invariants.values()) else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from eternal.cli import EXIT_INVARIANT, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main

SMALL = "invariants.samples = 3\ninvariants.t_max = 2.0\nscheme.t_max = 2.0\n"


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def manifest(path):
    return json.loads((path / "manifest.json").read_text())


def test_dry_run_writes_nothing(tmp_path, small_cfg, capsys):
    out = tmp_path / "out"
    assert main(["family", "--config", str(small_cfg), "--out", str(out), "--dry-run"]) == EXIT_OK
    assert not out.exists()
    assert "config ok" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    assert main(["equilibria", "--config", str(tmp_path / "nope.cfg")]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.bogus = 1\n")
    assert main(["equilibria", "--config", str(bad)]) == EXIT_USAGE
    assert main(["no-such-command"]) == EXIT_USAGE
    assert main(["evolve", "--initial", "nowhere", "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_equilibria_reports_tail_invariant(tmp_path):
    out = tmp_path / "eq"
    code = main(["equilibria", "--out", str(out)])
    m = manifest(out)
    assert {"f_minus.csv", "f_plus.json", "equilibria_report.json", "config.cfg"} <= set(m["artifacts"])
    assert m["invariants"]["residual"] == "pass" and m["invariants"]["ordered"] == "pass"
    failing = [k for k, v in m["invariants"].items() if v == "fail"]
    assert code == (EXIT_INVARIANT if failing else EXIT_OK)


def test_family_and_duhamel_commands(tmp_path, small_cfg):
    assert main(["family", "--config", str(small_cfg), "--out", str(tmp_path / "fam")]) == EXIT_OK
    assert "family_report.json" in manifest(tmp_path / "fam")["artifacts"]
    assert main(["duhamel-check", "--config", str(small_cfg), "--out", str(tmp_path / "du")]) == EXIT_OK
    assert manifest(tmp_path / "du")["invariants"] == {"discrepancy": "pass", "kernel_mass": "pass"}


@pytest.mark.parametrize("initial", ["midpoint", "f-minus", "below"])
def test_evolve_command(tmp_path, small_cfg, initial):
    out = tmp_path / initial
    assert main(["evolve", "--initial", initial, "--config", str(small_cfg), "--out", str(out)]) == EXIT_OK
    m = manifest(out)
    assert "trajectory.csv" in m["artifacts"]
    assert ("funnel" in m["invariants"]) == (initial == "midpoint")


def test_evolve_from_file(tmp_path, small_cfg, pair):
    from eternal.grid import write_csv

    path = tmp_path / "start.csv"
    write_csv(path, 0.25 * pair.f_minus.f + 0.75 * pair.f_plus.f)
    out = tmp_path / "file"
    assert main(["evolve", "--initial", str(path), "--config", str(small_cfg), "--out", str(out)]) == EXIT_OK
    assert manifest(out)["invariants"]["funnel"] == "pass"


def test_numerical_failure_exit_code(tmp_path):
    cfg = tmp_path / "shallow.cfg"
    cfg.write_text("heteroclinic.k_max = 1\n")
    out = tmp_path / "het"
    assert main(["heteroclinic", "--config", str(cfg), "--out", str(out)]) == EXIT_NUMERICAL
    assert "CoverageError" in manifest(out)["error"]


def test_manifests_are_deterministic(tmp_path, small_cfg):
    for name in ("a", "b"):
        assert main(["invariants", "--config", str(small_cfg), "--out", str(tmp_path / name)]) == EXIT_OK
    for f in ("manifest.json", "invariants_report.json", "config.cfg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_module_entry_point(small_cfg):
    res = subprocess.run([sys.executable, "-m", "eternal", "invariants", "--config", str(small_cfg), "--dry-run"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "invariants.samples = 3" in res.stdout

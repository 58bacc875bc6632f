from __future__ import annotations

import dataclasses
import json
import logging

import numpy as np
import pytest

from eternal.errors import AnchorUnreachable, CoverageError
from eternal.evolve import SchemeConfig
from eternal.heteroclinic import (
    assemble,
    build_initial,
    family_parameter,
    match_anchor,
    pde_residual,
    run_sequence,
    save_bundle,
    verify_not_equilibrium,
)

WINDOW = (-2.0, 2.0, -10.0, 10.0)
SCHEME = SchemeConfig(t_max=50.0, store_stride=20)


@pytest.fixture(scope="module")
def sequence(pair, family):
    return run_sequence(pair, family, SCHEME, k_max=6, t_after=WINDOW[1])


@pytest.fixture(scope="module")
def bundle(sequence):
    a_star, runs = sequence
    return assemble(runs, WINDOW, a_star)


def test_family_parameter():
    assert family_parameter(0) == 0.5 and family_parameter(3) == 1 / 16
    with pytest.raises(ValueError):
        family_parameter(-1)


def test_build_initial(pair, family):
    U0 = build_initial(0, pair, family)
    expected = 0.5 * family.member(0.5).g.f.values + 0.5 * pair.f_plus.f.values
    np.testing.assert_array_equal(U0.values, expected)
    dists = []
    for k in range(8):
        U = build_initial(k, pair, family).values[1:-1]
        g = family.member(family_parameter(k)).g.f.values[1:-1]
        assert np.all(g < U) and np.all(U < pair.f_plus.f.values[1:-1])
        dists.append(np.max(np.abs(U - pair.f_minus.f.values[1:-1])))
    assert np.all(np.diff(dists) < 0)


def test_build_initial_needs_member(pair, family):
    with pytest.raises(KeyError, match="c_40"):
        build_initial(40, pair, family)


def test_anchor_matching(sequence):
    a_star, runs = sequence
    assert runs[0].sigma_k == 0.0
    for r in runs:
        assert r.anchor_error < 1e-6
        assert not r.multiple_crossings
        i0 = r.trajectory.index_of_time(0.0)
        # slices sit exactly on the shared j*dt lattice after the shift
        lattice = r.trajectory.times[1:] / SCHEME.dt
        np.testing.assert_allclose(lattice, np.rint(lattice), atol=1e-6)
        assert r.trajectory.values[i0, r.U_k.grid.center_index] == pytest.approx(a_star, abs=1e-6)
    T = np.array([r.T_k for r in runs])
    assert np.all(np.diff(T) < 0)


def test_anchor_above_f_plus_is_unreachable(pair, family, phi):
    U = build_initial(1, pair, family)
    with pytest.raises(AnchorUnreachable):
        match_anchor(U, pair.f_plus.f.center + 0.01, phi, SchemeConfig(t_max=400.0, steady_tol=1e-4))


def test_anchor_below_start_rejected(pair, family, phi):
    U = build_initial(0, pair, family)
    with pytest.raises(ValueError):
        match_anchor(U, U.center - 0.1, phi, SCHEME)


def test_bundle_deltas_and_limit(bundle):
    assert bundle.T_strictly_decreasing
    assert bundle.covering == [r.k for r in bundle.runs if r.T_k <= WINDOW[0]]
    d = bundle.delta_values
    assert d.size >= 3 and np.all(np.diff(d) < 0)
    lim = bundle.limit_estimate
    assert lim.times[0] >= WINDOW[0] - 1e-9 and lim.times[-1] <= WINDOW[1] + 1e-9
    assert bundle.limit_k == bundle.covering[-1]


def test_deeper_runs_start_closer_to_f_minus(pair, bundle):
    fm = pair.f_minus.f.values
    d = [np.max(np.abs(r.trajectory.values[0] - fm)) for r in bundle.runs]
    assert np.all(np.diff(d) < 0)


def test_limit_satisfies_pde(bundle, phi):
    res = pde_residual(bundle.limit_estimate, phi, WINDOW[2:])
    assert res < 10 * (SCHEME.dt + phi.grid.spacing**2)


def test_assemble_requires_two_covering_runs(sequence):
    a_star, runs = sequence
    with pytest.raises(CoverageError):
        assemble(runs[:2], WINDOW, a_star)
    with pytest.raises(ValueError):
        assemble(runs, (1.0, 0.0, -1.0, 1.0), a_star)


def test_verify_not_equilibrium(bundle, pair, caplog):
    assert verify_not_equilibrium(bundle, pair)
    fake = dataclasses.replace(bundle, anchor_value=pair.f_minus.f.center)
    assert not verify_not_equilibrium(fake, pair)
    with caplog.at_level(logging.WARNING):
        assert not verify_not_equilibrium(bundle, pair, tol=10.0)
    assert "cannot resolve" in caplog.text


def test_bundle_persistence(tmp_path, bundle):
    names = save_bundle(bundle, tmp_path)
    data = json.loads((tmp_path / "bundle.json").read_text())
    assert set(data) >= {"a_star", "runs", "deltas", "window"}
    assert [r["k"] for r in data["runs"]] == [r.k for r in bundle.runs]
    assert {"k", "c_k", "sigma_k", "T_k", "termination"} <= set(data["runs"][0])
    assert all((tmp_path / n).exists() for n in names)

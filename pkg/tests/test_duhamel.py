from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import gaussian_heat

from eternal.duhamel import (
    duhamel_check,
    duhamel_reconstruct,
    heat_convolve,
    heat_kernel,
    interior_mask,
    kernel_mass,
    min_resolved_time,
    missed_mass,
    save_report,
)
from eternal.errors import CoverageError, GridError
from eternal.evolve import SchemeConfig, evolve


def test_kernel_values():
    assert heat_kernel(1.0 / (4.0 * np.pi), 0.0) == pytest.approx(1.0)
    x = np.linspace(-3, 3, 13)
    np.testing.assert_array_equal(heat_kernel(0.7, x), heat_kernel(0.7, -x))
    with pytest.raises(ValueError):
        heat_kernel(0.0, 0.0)


@pytest.mark.parametrize("t", np.geomspace(0.1, 10.0, 9))
def test_kernel_mass(grid, t):
    assert abs(kernel_mass(t, grid) - 1.0) < 1e-6


def test_convolve_constant_preserves_mass_in_interior(grid):
    out = heat_convolve(grid.constant(1.0), 1.0)
    inner = interior_mask(grid, 1.0)
    assert np.max(np.abs(out.values[inner] - 1.0)) < 1e-6
    # edge nodes lose about half the kernel to truncation
    assert out.values[0] == pytest.approx(0.5, abs=0.01)
    # the trapezoid endpoint weight adds O(h**2) to the truncated mass near the ends
    np.testing.assert_allclose(1.0 - out.values, missed_mass(1.0, grid), atol=5e-5)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 3.0])
def test_convolve_gaussian_oracle(grid, t):
    out = heat_convolve(grid.sample(lambda x: np.exp(-x**2 / 2)), t)
    inner = np.abs(grid.nodes) <= 20
    assert np.max(np.abs(out.values - gaussian_heat(t, grid.nodes))[inner]) < 1e-5


def test_convolve_preserves_oddness(grid):
    out = heat_convolve(grid.sample(lambda x: x * np.exp(-x**2)), 0.8).values
    np.testing.assert_allclose(out, -out[::-1], atol=1e-15)


def test_unresolved_kernel_rejected(grid):
    assert min_resolved_time(grid) == pytest.approx(grid.spacing**2)
    with pytest.raises(GridError, match="t >="):
        heat_convolve(grid.constant(1.0), 0.5 * grid.spacing**2)


@settings(max_examples=15, deadline=None)
@given(t1=st.floats(0.5, 2.0), t2=st.floats(0.5, 2.0))
def test_semigroup(grid, t1, t2):
    f = grid.sample(lambda x: np.exp(-x**2 / 3) * np.cos(x))
    two = heat_convolve(heat_convolve(f, t1), t2).values
    one = heat_convolve(f, t1 + t2).values
    inner = np.abs(grid.nodes) <= 15
    assert np.max(np.abs(two - one)[inner]) < 1e-5


def test_equilibrium_reconstructs_itself(pair, phi):
    sch = SchemeConfig(t_max=1.0, store_stride=10, steady_tol=1e-20)
    traj = evolve(pair.f_plus.f, phi, sch)
    recon = duhamel_reconstruct(traj, phi, 1.0)
    inner = interior_mask(phi.grid, 1.0)
    assert np.max(np.abs(recon.values - pair.f_plus.f.values)[inner]) < 1e-3


def test_funnel_start_agrees_and_refines(pair, phi, rng):
    from eternal.analysis import random_funnel_initial

    U = random_funnel_initial(pair, rng)
    reports = {}
    for stride in (100, 50, 20, 10):
        traj = evolve(U, phi, SchemeConfig(t_max=1.0, store_stride=stride), stop_at_steady=False)
        reports[stride] = duhamel_check(traj, phi, 1.0)[1]
    assert reports[10].sup_discrepancy < 1e-3
    assert reports[10].slices_used == 101
    assert reports[10].interior_half_width > 15
    # halving the stride helps while time quadrature dominates; below ~1e-4 the
    # O(h**2) gap between the discrete and the exact Laplacian is the floor
    d = [reports[s].sup_discrepancy for s in (100, 50, 20)]
    assert d[0] > d[1] > d[2]


def test_coarse_stride_rejected(pair, phi):
    traj = evolve(0.5 * (pair.f_minus.f + pair.f_plus.f), phi, SchemeConfig(t_max=1.0, store_stride=200))
    with pytest.raises(CoverageError):
        duhamel_reconstruct(traj, phi, 1.0)


def test_report_serializes(tmp_path, pair, phi):
    traj = evolve(0.5 * (pair.f_minus.f + pair.f_plus.f), phi, SchemeConfig(t_max=1.0, store_stride=10))
    _, rep = duhamel_check(traj, phi, 1.0)
    save_report(rep, tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["sup_discrepancy"] == rep.sup_discrepancy and data["truncation_estimate"] >= 0

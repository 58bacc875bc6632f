from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eternal.errors import GridError
from eternal.grid import (
    GridFunction,
    SpatialGrid,
    first_difference,
    l1_norm,
    read_csv,
    second_difference,
    sup_norm,
    trapezoid_integral,
    write_csv,
)


def fine_grid() -> SpatialGrid:
    return SpatialGrid(5.0, 1001)  # h = 0.01


def test_default_grid_layout(grid):
    assert grid.spacing == pytest.approx(0.05)
    x = grid.nodes
    assert x[grid.center_index] == 0.0
    assert x[0] == -30.0 and x[-1] == 30.0
    np.testing.assert_array_equal(x, -x[::-1])
    assert grid.tail_value == pytest.approx(6.0 / 900.0)


@pytest.mark.parametrize("n", [0, 1, 2, 4, 1200])
def test_grid_rejects_bad_node_count(n):
    with pytest.raises(GridError):
        SpatialGrid(30.0, n)


def test_grid_rejects_bad_width():
    with pytest.raises(GridError):
        SpatialGrid(0.0, 11)


def test_grid_function_is_frozen_copy(grid):
    raw = np.zeros(grid.node_count)
    f = GridFunction(grid, raw)
    raw[0] = 1.0
    assert f.values[0] == 0.0
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_grid_function_names_first_bad_node():
    g = SpatialGrid(1.0, 5)
    with pytest.raises(GridError, match="node 2"):
        GridFunction(g, [0.0, 1.0, np.nan, np.inf, 0.0])


def test_grid_function_shape_and_grid_mismatch():
    g = SpatialGrid(1.0, 5)
    with pytest.raises(GridError):
        GridFunction(g, np.zeros(4))
    with pytest.raises(GridError, match="mismatch"):
        g.constant(1.0) + SpatialGrid(2.0, 5).constant(1.0)


def test_second_difference_constant_and_quadratic():
    g = SpatialGrid(3.0, 61)
    d2c = second_difference(g.constant(4.2)).values
    assert np.all(d2c[1:-1] == 0.0)
    assert np.max(np.abs(d2c)) < 1e-12
    d2 = second_difference(g.sample(lambda x: x**2)).values
    np.testing.assert_allclose(d2, 2.0, rtol=1e-9)  # boundary stencil is exact for quadratics too


def test_second_difference_sine_accuracy():
    g = fine_grid()
    d2 = second_difference(g.sample(np.sin)).values
    assert np.max(np.abs(d2[1:-1] + np.sin(g.nodes[1:-1]))) < 1e-4


def test_first_difference_constant_affine_gaussian():
    g = SpatialGrid(3.0, 61)
    assert np.all(first_difference(g.constant(-1.0)).values == 0.0)
    np.testing.assert_allclose(first_difference(g.sample(lambda x: x)).values[1:-1], 1.0, rtol=1e-12)
    fg = fine_grid()
    d1 = first_difference(fg.sample(lambda x: np.exp(-x**2 / 2))).values
    assert np.max(np.abs(d1 + fg.nodes * np.exp(-fg.nodes**2 / 2))) < 1e-4


def test_second_difference_converges_at_second_order():
    errs = []
    for n in (201, 401, 801):
        g = SpatialGrid(3.0, n)
        d2 = second_difference(g.sample(np.cos)).values
        errs.append(np.max(np.abs(d2 + np.cos(g.nodes))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_trapezoid_examples(grid):
    assert trapezoid_integral(SpatialGrid(1.0, 11).constant(1.0)) == pytest.approx(2.0)
    assert trapezoid_integral(grid.constant(0.0)) == 0.0
    heat = grid.sample(lambda x: np.exp(-x**2 / 4) / np.sqrt(4 * np.pi))
    assert abs(trapezoid_integral(heat) - 1.0) < 1e-6


def test_norms(grid):
    assert sup_norm(grid.constant(-2.0)) == 2.0
    assert sup_norm(grid.constant(0.0)) == 0.0 and l1_norm(grid.constant(0.0)) == 0.0
    x = grid.nodes
    tail = GridFunction(grid, np.where(np.abs(x) >= 1.0, 6.0 / np.maximum(x**2, 1.0), 0.0))
    # exact value 11.6; the trapezoid rule adds h/2 * 6 at each jump |x| = 1
    assert abs(l1_norm(tail) - (11.6 + 6.0 * grid.spacing)) < 1e-2


def test_csv_round_trip(tmp_path, grid):
    f = grid.sample(lambda x: np.exp(-x**2) + 1e-3 * x)
    path = tmp_path / "f.csv"
    write_csv(path, f)
    g = read_csv(path)
    assert g.grid == grid
    np.testing.assert_array_equal(g.values, f.values)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(-5, 5), b=st.floats(-5, 5),
    k1=st.floats(0.1, 3.0), k2=st.floats(0.1, 3.0),
)
def test_second_difference_is_linear(a, b, k1, k2):
    g = SpatialGrid(4.0, 81)
    f1, f2 = g.sample(lambda x: np.sin(k1 * x)), g.sample(lambda x: np.cos(k2 * x))
    lhs = second_difference(a * f1 + b * f2).values
    rhs = a * second_difference(f1).values + b * second_difference(f2).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(a) + abs(b)) / g.spacing**2)

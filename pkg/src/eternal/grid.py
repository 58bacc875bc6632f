"""Uniform truncated 1-D grid, grid functions, difference operators and norms."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .errors import GridError


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid on [-L, L] with an odd number of nodes so that x = 0 is a node."""

    half_width: float = 30.0
    node_count: int = 1201

    def __post_init__(self) -> None:
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise GridError(f"half_width must be positive and finite, got {self.half_width}")
        if self.node_count < 3 or self.node_count % 2 == 0:
            raise GridError(f"node_count must be odd and >= 3, got {self.node_count}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.node_count - 1)

    @property
    def center_index(self) -> int:
        return (self.node_count - 1) // 2

    @cached_property
    def nodes(self) -> np.ndarray:
        # built symmetric about an exact zero; endpoints pinned to +-L
        m = self.center_index
        x = self.spacing * (np.arange(self.node_count) - m)
        x[0], x[-1] = -self.half_width, self.half_width
        x.setflags(write=False)
        return x

    @property
    def tail_value(self) -> float:
        """Shared Dirichlet value 6/L**2 of both equilibria at the truncation boundary."""
        return 6.0 / self.half_width**2

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
        return GridFunction(self, func(self.nodes))

    def constant(self, value: float) -> GridFunction:
        return GridFunction(self, np.full(self.node_count, float(value)))

    def index_of(self, x: float) -> int:
        return int(np.argmin(np.abs(self.nodes - x)))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real field sampled at every node of a grid. Values are copied and frozen."""

    grid: SpatialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.node_count,):
            raise GridError(
                f"expected {self.grid.node_count} values, got array of shape {v.shape}"
            )
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            i = int(bad[0])
            raise GridError(f"non-finite value {v[i]!r} at node {i} (x = {self.grid.nodes[i]:.6g})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def at(self, x: float) -> float:
        return float(self.values[self.grid.index_of(x)])

    @property
    def center(self) -> float:
        return float(self.values[self.grid.center_index])

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return other.values
        return other

    def __add__(self, other) -> GridFunction:
        return GridFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> GridFunction:
        return GridFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other) -> GridFunction:
        return GridFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other) -> GridFunction:
        return GridFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return GridFunction(self.grid, -self.values)

    def __abs__(self) -> GridFunction:
        return GridFunction(self.grid, np.abs(self.values))


def _same_grid(*fs: GridFunction) -> SpatialGrid:
    g = fs[0].grid
    for f in fs[1:]:
        if f.grid != g:
            raise GridError(f"grid mismatch: {g} vs {f.grid}")
    return g


def second_difference_array(v: np.ndarray, h: float) -> np.ndarray:
    """Second difference along the last axis; one-sided second-order stencils at the ends."""
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., :-2] - 2.0 * v[..., 1:-1] + v[..., 2:]) / h**2
    if v.shape[-1] >= 4:
        out[..., 0] = (2 * v[..., 0] - 5 * v[..., 1] + 4 * v[..., 2] - v[..., 3]) / h**2
        out[..., -1] = (2 * v[..., -1] - 5 * v[..., -2] + 4 * v[..., -3] - v[..., -4]) / h**2
    else:
        out[..., 0] = out[..., 1]
        out[..., -1] = out[..., -2]
    return out


def first_difference_array(v: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3 * v[..., 0] + 4 * v[..., 1] - v[..., 2]) / (2.0 * h)
    out[..., -1] = (3 * v[..., -1] - 4 * v[..., -2] + v[..., -3]) / (2.0 * h)
    return out


def second_difference(f: GridFunction) -> GridFunction:
    return GridFunction(f.grid, second_difference_array(f.values, f.grid.spacing))


def first_difference(f: GridFunction) -> GridFunction:
    return GridFunction(f.grid, first_difference_array(f.values, f.grid.spacing))


def trapezoid_integral(f: GridFunction) -> float:
    return float(trapezoid(f.values, dx=f.grid.spacing))


def sup_norm(f: GridFunction) -> float:
    return float(np.max(np.abs(f.values)))


def l1_norm(f: GridFunction) -> float:
    return float(trapezoid(np.abs(f.values), dx=f.grid.spacing))


def write_csv(path: str | Path, f: GridFunction) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "value"])
        for xi, vi in zip(f.grid.nodes, f.values):
            w.writerow([f"{xi:.17g}", f"{vi:.17g}"])


def read_csv(path: str | Path, grid: SpatialGrid | None = None) -> GridFunction:
    """Read a ``x,value`` CSV. Without ``grid``, one is inferred from the node column."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x, v = data[:, 0], data[:, 1]
    if grid is None:
        grid = SpatialGrid(half_width=float(x[-1]), node_count=len(x))
    if len(x) != grid.node_count or not np.allclose(x, grid.nodes, rtol=0, atol=1e-9 * grid.half_width):
        raise GridError(f"{path}: nodes do not match {grid}")
    return GridFunction(grid, v)

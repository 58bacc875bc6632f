from __future__ import annotations

import numpy as np
import pytest

from eternal.equilibria import find_pair, fit_family_amplitude, solve_family
from eternal.forcing import ForcingParams, build_phi, direction_for
from eternal.grid import SpatialGrid

CRITERIA: dict[int, tuple[str, bool, str]] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
    CRITERIA[number] = (title, bool(passed), detail)
    print(f"CRITERION {number} {'PASS' if passed else 'FAIL'}: {title} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        title, ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}  {detail}")


@pytest.fixture(scope="session")
def grid() -> SpatialGrid:
    return SpatialGrid()


@pytest.fixture(scope="session")
def phi(grid):
    return build_phi(ForcingParams(), grid)


@pytest.fixture(scope="session")
def pair(phi):
    return find_pair(phi)


@pytest.fixture(scope="session")
def direction(pair):
    return fit_family_amplitude(pair, direction_for(pair.f_minus.f))


@pytest.fixture(scope="session")
def family(pair, direction):
    cs = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] + [2.0 ** (-k - 1) for k in range(12)]
    return solve_family(pair, direction, sorted(set(cs)))


@pytest.fixture
def rng():
    return np.random.default_rng(7)

import numpy as np
import pytest

from kronsep import new_grid, planck_model, simulate, SimConfig, sylvester_problem

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}: {detail}")


def make_case(level, seed=0, nhits=None, P=None):
    """Grid, model, true sources and maps for a simulated problem."""
    grid = new_grid(level)
    model = planck_model(grid.npix, Nhits=nhits, P=P)
    S, Y = simulate(SimConfig(level=level, seed=seed), grid, model)
    return grid, model, S, Y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[1, 2, 3])
def small_case(request):
    return make_case(request.param, seed=request.param)


@pytest.fixture
def weighted_case():
    """Level 3 with non-uniform hit counts and smoothness scales."""
    r = np.random.default_rng(7)
    grid = new_grid(3)
    return make_case(3, seed=3, nhits=r.integers(1, 6, grid.npix).astype(float), P=r.uniform(0.5, 3.0, 4))


@pytest.fixture
def weighted_problem(weighted_case):
    grid, model, _, Y = weighted_case
    return sylvester_problem(grid, model, Y)

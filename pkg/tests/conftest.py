import numpy as np
import pytest

from llab import geometry as geo
from llab import models
from llab import solver


@pytest.fixture(scope="session")
def annulus05():
    return models.ClosedFormSolution.annulus(0.5)


@pytest.fixture(scope="session")
def unit_disc():
    return models.ClosedFormSolution.disc(1.0)


@pytest.fixture(scope="session")
def solved_annulus_64():
    """Discrete solution on B_2 minus closed B_{1/2} at h = 1/64."""
    return solver.solve(geo.annulus(0.5, 2.0), solver.SolverConfig(h=1 / 64))


@pytest.fixture(scope="session")
def solved_disc_32():
    return solver.solve(geo.disc(1.0), solver.SolverConfig(h=1 / 32))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Store one acceptance outcome for the end-of-run summary."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def record(name, passed, detail):
        store[name] = (passed, detail)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(store, key=lambda s: int(s[1:])):
        passed, detail = store[name]
        terminalreporter.write_line(f"{name} {'PASS' if passed else 'FAIL'}  {detail}")

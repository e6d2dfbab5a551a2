import numpy as np
import pytest

from lindbundle.config import ScenarioConfig
from lindbundle.runner import prepare


@pytest.fixture(scope="session")
def cooling_cfg():
    return ScenarioConfig.preset("cooling")


@pytest.fixture(scope="session")
def heating_cfg():
    return ScenarioConfig.preset("heating")


@pytest.fixture(scope="session")
def cooling_system(cooling_cfg):
    return prepare(cooling_cfg)


@pytest.fixture(scope="session")
def heating_system(heating_cfg):
    return prepare(heating_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_density(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Store a one-line verdict for the acceptance summary."""

    def record(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])

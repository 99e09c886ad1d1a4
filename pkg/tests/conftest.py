import numpy as np
import pytest

from koopkin.simulate import PotentialSpec, calibrated_chain

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def chain_1d():
    """1D benchmark chain on [0, 2], bins 0.02, frames every 0.002."""
    return calibrated_chain(PotentialSpec("well1d", 0.3), (0.0, 2.0), 0.02, 0.002)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

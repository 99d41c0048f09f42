import sys

import numpy as np
import pytest

from ltpa import pasim
from ltpa.signal import BurstProfile, IqSignal, generate_bursty

FS = 30.72e6
BW = 4 / 30.72


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_signal(rng, n, scale=0.3, rate=1e6):
    x = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    return IqSignal(x, rate)


@pytest.fixture(scope="session")
def burst_x():
    """The bursty drive used for the fixture experiments (4 x 50000 samples)."""
    return generate_bursty(BurstProfile(50_000, (0, -10, 0, -10), pasim.NOMINAL_RMS), BW, 7, FS)


@pytest.fixture(scope="session")
def fixture_pa():
    return pasim.default_doherty_like()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

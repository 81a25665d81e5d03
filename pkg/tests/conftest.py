import sys

import numpy as np
import pytest

from robustirs.channel import ChannelRealization, NetworkGeometry, crandn


@pytest.fixture
def geo():
    return NetworkGeometry()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_channel(rng, M, N, scale=1.0):
    return ChannelRealization(scale * crandn(rng, M), scale * crandn(rng, (M, N)), scale * crandn(rng, N))


def random_phases(rng, N):
    return np.exp(1j * rng.uniform(0, 2 * np.pi, N))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = sorted(getattr(mod, "RESULTS", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

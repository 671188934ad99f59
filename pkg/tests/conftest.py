from __future__ import annotations

import sys

import numpy as np
import pytest
from hypothesis import settings

from nucinv.cavity import reference_params

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ref100():
    """Reference cavity, N = 100, Delta_C = kappa."""
    return reference_params(100, 1.0)


@pytest.fixture(scope="session")
def ref1():
    return reference_params(1, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])

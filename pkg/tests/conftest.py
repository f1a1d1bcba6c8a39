"""Shared fixtures: the reference parameter set (k0=1, lam=2, nu=1, a=1,
b=-1.25) under which the invariant exponent is exactly beta = 1."""

import numpy as np
import pytest

from sabrakit import MeasureParams, SabraCoefficients, ShellState, SpectralParams


@pytest.fixture
def spectral():
    return SpectralParams(k0=1.0, lam=2.0, M=12)


@pytest.fixture
def coeffs():
    return SabraCoefficients(a=1.0, b=-1.25, lam=2.0)


@pytest.fixture
def measure(spectral, coeffs):
    return MeasureParams(beta=coeffs.beta, nu=1.0, spectral=spectral)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


def random_state(spectral, rng, scale=1.0):
    return ShellState(spectral, scale * rng.standard_normal((spectral.M, 2)))


# one line per acceptance criterion, printed after the test summary so the
# verdicts are visible even though pytest captures stdout of passing tests
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

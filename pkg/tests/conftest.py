import numpy as np
import pytest

from logdiff.profiles import ProfileParams, solve_profile


@pytest.fixture(scope="session")
def psi1():
    """n = 3, beta = 1, lambda = 1 profile out to 1e6."""
    return solve_profile(ProfileParams.self_similar(3, 1.0, 1.0), 1e6, 1e-10)


@pytest.fixture(scope="session")
def psi1_short():
    return solve_profile(ProfileParams.self_similar(3, 1.0, 1.0), 1e3, 1e-10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])

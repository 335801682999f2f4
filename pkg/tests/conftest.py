import numpy as np
import pytest

from shadowflow import Config, GreenKernelModel, make_coefficients, pure_quartic
from shadowflow.config import OFF_MAX_BUMP
from shadowflow.curvature import with_bumps


@pytest.fixture(scope="session")
def field():
    return pure_quartic(5)


@pytest.fixture(scope="session")
def bump_field():
    return with_bumps(5, [OFF_MAX_BUMP])


@pytest.fixture(scope="session")
def kernel():
    return GreenKernelModel(n=5, h0=0.5)


@pytest.fixture(scope="session")
def coeffs():
    return make_coefficients(5)


@pytest.fixture
def cfg():
    return Config()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_points(rng, count, n=5, r_lo=0.01, r_hi=1.0):
    """Points with |x| log-uniform in [r_lo, r_hi) and uniform directions."""
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1)[:, None]
    r = np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), count)) * 0.999
    return u * r[:, None]


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])

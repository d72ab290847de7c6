import numpy as np
import pytest

from reljacobi.jacobi import boost_velocity


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_phase_point(rng, lo=-0.5, hi=0.5, speed=0.8):
    """On-shell Minkowski phase point with a random 3-velocity."""
    x = rng.uniform(lo, hi, 4)
    v = rng.normal(size=3)
    v *= rng.uniform(0, speed) / np.linalg.norm(v)
    return np.concatenate([x, boost_velocity(v)])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_traj(rng, n, lo=0.0, hi=1000.0):
    return rng.uniform(lo, hi, size=(n, 2))


def random_box(rng, min_side=1.0):
    x1, y1 = rng.uniform(0, 900, size=2)
    w, h = rng.uniform(min_side, 1000 - max(x1, y1) - 1, size=2)
    return (x1, y1, x1 + w, y1 + h)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])

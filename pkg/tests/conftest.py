import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_boxes(rng, n, extent=100.0, min_side=1.0, max_side=40.0):
    xy = rng.uniform(0, extent, size=(n, 2))
    wh = rng.uniform(min_side, max_side, size=(n, 2))
    return np.hstack([xy, xy + wh])


# Acceptance lines collected during the run and repeated in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

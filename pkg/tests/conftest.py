import numpy as np
import pytest
from hypothesis import settings

from cascadetaxis import Grid

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# Filled by test_acceptance; printed at the end of the session.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def grid8():
    return Grid(8, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

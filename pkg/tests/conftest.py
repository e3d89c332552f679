import numpy as np
import pytest

from rnnpuf import Environment, MismatchParams, RnnConfig, sample_device


@pytest.fixture
def small_device():
    return sample_device(7, 16, 8)


@pytest.fixture
def corner():
    return Environment(-45.0, noise_seed=100)


@pytest.fixture
def golden():
    return Environment.golden()


def exhaustive_rows(a: int) -> np.ndarray:
    """All 2^a - 1 non-zero row masks, in counting order."""
    codes = np.arange(1, 2 ** a, dtype=np.int64)
    return ((codes[:, None] >> np.arange(a)[::-1]) & 1).astype(np.uint8)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from freeclt.measures import Atomic, Semicircle, standardize, symmetric_bernoulli, two_atom_skewed


@pytest.fixture(scope="session")
def test_measures():
    """Standardized measures used across the solver tests."""
    return {
        "semicircle": Semicircle(1.0),
        "bernoulli": symmetric_bernoulli(),
        "two_atom_08": two_atom_skewed(0.8),
        "two_atom_03": two_atom_skewed(0.3),
        "three_atom": Atomic(np.array([-1.0, 0.0, 1.0]) * np.sqrt(1.5), [1 / 3, 1 / 3, 1 / 3]),
        "skew_three": standardize(Atomic([-1.0, 0.2, 3.0], [0.3, 0.5, 0.2])),
    }


def upper_points(count=100, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-5, 5, count)
    y = 10 ** rng.uniform(-2, 1, count)
    return x + 1j * y


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

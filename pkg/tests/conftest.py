import sys

import pytest

from contactlab import estimators as E


@pytest.fixture(scope="session")
def beta_hat():
    """Cheap time-per-site estimate at rate 2 shared by several tests."""
    return E.estimate_beta(2.0, (10, 20, 40), reps=150, seed=2024).value


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

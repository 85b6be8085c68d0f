import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_spd(rng, p, cond_floor=0.5):
    a = rng.standard_normal((p, p))
    return a @ a.T / p + cond_floor * np.eye(p)


def random_sym(rng, p):
    a = rng.standard_normal((p, p))
    return 0.5 * (a + a.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import functools

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


@functools.lru_cache(maxsize=None)
def phi_run(k: int, n_max: int):
    """Shared phi analysis; the n = 10^8 run takes ~20 s and ~2.2 GB, so do it once."""
    from lagfib.phi import analyze_phi

    return analyze_phi(k, n_max)


@pytest.fixture(scope="session")
def phi2_full():
    return phi_run(2, 10**8)


@pytest.fixture(scope="session")
def phi2_small():
    return phi_run(2, 10**6)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

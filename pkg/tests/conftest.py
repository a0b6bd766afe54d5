import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))

ACCEPTANCE = []


def record_criterion(number, title, passed, detail=""):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE.append((number, line))
    print(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE, key=lambda t: t[0]):
        terminalreporter.write_line(line)

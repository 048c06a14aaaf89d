import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "oldrlab", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("oldrlab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, repeated in the terminal summary so it
# survives output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

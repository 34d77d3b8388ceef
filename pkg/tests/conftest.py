import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "mgsl",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("mgsl")

# Filled by tests/test_acceptance.py, printed once at the end of the run.
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@st.composite
def physical_states(draw, max_speed=3.0):
    """Conservative 4-vectors with positive density and pressure."""
    rho = draw(st.floats(0.2, 5.0))
    v1 = draw(st.floats(-max_speed, max_speed))
    v2 = draw(st.floats(-max_speed, max_speed))
    p = draw(st.floats(0.2, 5.0))
    return np.array([rho, rho * v1, rho * v2, p / 0.4 + 0.5 * rho * (v1 * v1 + v2 * v2)])


unit_angles = st.floats(0.0, 2.0 * math.pi)
phases = st.floats(-math.pi, math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)

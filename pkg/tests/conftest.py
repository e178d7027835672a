import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from sspectrum.qmat import QMatrix
from sspectrum.quat import Quaternion

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SEEDS = [1, 2, 3, 4, 5]

finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)
quaternions = st.builds(Quaternion, finite, finite, finite, finite)
nonzero_quaternions = quaternions.filter(lambda q: q.norm() > 1e-3)


@st.composite
def matrices(draw, n=None):
    size = draw(st.integers(1, 4)) if n is None else n
    seed = draw(st.integers(0, 2**32 - 1))
    return QMatrix.random(size, np.random.default_rng(seed))


@pytest.fixture(params=SEEDS)
def rng(request):
    return np.random.default_rng(request.param)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}
SUITE_BUDGET_S = 120.0
_START = [0.0]


def pytest_sessionstart(session):
    _START[0] = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    if 11 in ACCEPTANCE:
        elapsed = time.perf_counter() - _START[0]
        ok, text = ACCEPTANCE[11]
        ACCEPTANCE[11] = (ok and elapsed < SUITE_BUDGET_S, f"{text}; session {elapsed:.1f}s (budget {SUITE_BUDGET_S:.0f}s)")
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {text}")

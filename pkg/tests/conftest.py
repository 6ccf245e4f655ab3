import datetime as dt

import numpy as np
import pytest

from outbreakbench import _accel
from outbreakbench.core import Outbreak, SeriesKey, mmwr_week_of

BACKENDS = [False] + ([True] if _accel.NUMBA_AVAILABLE else [])


@pytest.fixture(params=BACKENDS, ids=lambda b: "numba" if b else "numpy")
def kernel_backend(request):
    with _accel.backend(request.param):
        yield request.param


def make_outbreak(values, uid="X_L_CASES_0", core=None, start=dt.date(2020, 3, 21), key=None):
    values = np.asarray(values, dtype=float)
    n = values.size
    core = core or (0, n - 1)
    first = mmwr_week_of(start)
    return Outbreak(
        unique_id=uid,
        key=key or SeriesKey("X", "L", "CASES"),
        start_week=first,
        end_week=first.shift(n - 1),
        duration=n,
        values=values,
        core_start_offset=core[0],
        core_end_offset=core[1],
    )


@pytest.fixture
def outbreak_factory():
    return make_outbreak


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])

import os
import sys

import numpy as np
import pytest
from hypothesis import settings, strategies as st

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def pvectors(min_size=2, max_size=8, allow_zero=False):
    """Hypothesis strategy for p-value vectors in (0, 1]."""
    lo = 0.0 if allow_zero else 1e-6
    el = st.floats(min_value=lo, max_value=1.0, allow_nan=False)
    return st.lists(el, min_size=min_size, max_size=max_size).map(np.array)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])

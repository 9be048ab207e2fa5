import sys

import numpy as np
import pytest

from levymv import TimeGrid, sample_bundle


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_bundle():
    return sample_bundle(TimeGrid(1.0, 16), 5, 2, 3.0, None, master_seed=9)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for k in sorted(verdicts):
            terminalreporter.write_line(verdicts[k])

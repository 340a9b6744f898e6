import sys

import numpy as np
import pytest

from qhc.acceptance import bundled_fixtures
from qhc.io import load_instance


@pytest.fixture
def load():
    return lambda name: load_instance(bundled_fixtures() / f"{name}.json")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "SUMMARY", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)

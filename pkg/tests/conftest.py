import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts, echoed again at the end of the run
_VERDICTS = []


@pytest.fixture
def verdict(pytestconfig):
    """``verdict(n, ok, detail)`` prints one PASS/FAIL line for criterion ``n``."""
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")

    def emit(n, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        _VERDICTS.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

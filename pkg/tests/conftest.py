import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import corpus  # noqa: E402


@pytest.fixture
def binomial():
    return corpus.binomial()


@pytest.fixture
def trinomial():
    return corpus.trinomial()


@pytest.fixture
def trinomial_call():
    return corpus.trinomial_call()


@pytest.fixture
def utilities():
    return corpus.utilities()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k].line)

import sys
from pathlib import Path

import pytest
from hypothesis import settings

from cubewright import corpus

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def semilattice():
    return corpus.semilattice()


@pytest.fixture
def z2():
    return corpus.z2_maltsev()


@pytest.fixture
def majority():
    return corpus.majority()


@pytest.fixture
def chain3():
    return corpus.chain3()


@pytest.fixture
def meet_const1():
    return corpus.meet_const1()


@pytest.fixture
def trivial():
    return corpus.trivial()


def pytest_terminal_summary(terminalreporter):
    import acceptance_log
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES):
            terminalreporter.write_line(line)

"""Fixtures and reporting hooks shared by the suite."""

import pytest

from corpus import CORPUS

# one "[acceptance] ..." line per criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(CORPUS), ids=sorted(CORPUS))
def corpus_spec(request):
    """Each of the five corpus systems in turn."""
    return CORPUS[request.param]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

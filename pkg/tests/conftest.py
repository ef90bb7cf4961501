import pytest

from hawkeslab.rng import split_stream

# PASS/FAIL lines collected by the acceptance suite, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def stream():
    return split_stream(12345, 0, "tests")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

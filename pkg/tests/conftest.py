import pytest

from agplz.acceptance import warm_up

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session", autouse=True)
def _compile_kernels():
    warm_up()


@pytest.fixture
def report_criterion():
    def record(result):
        line = result.line()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return result

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

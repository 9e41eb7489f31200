import pytest

from martstop import laws, process, stopping

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def srw_spec():
    return process.MartingaleSpec(process.SUM, laws.make_c1(laws.simple_random_walk(False)))


@pytest.fixture(scope="session")
def srw_spec_exact():
    return process.MartingaleSpec(process.SUM, laws.make_c1(laws.simple_random_walk(True)))


@pytest.fixture
def first_positive():
    return stopping.FirstPositive()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

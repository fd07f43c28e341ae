import pytest

from multilevel_adaptation.landscape import build_matrix, generate


@pytest.fixture
def small_decomposed():
    return generate(build_matrix("decomposed", 4, 2, 1), seed=7)


@pytest.fixture
def base_decomposed():
    return generate(build_matrix("decomposed", 12, 3, 3), seed=11)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

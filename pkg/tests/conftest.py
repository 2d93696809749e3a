import pytest

from oracles import grid_boundary, quadratic_grid_oracle


@pytest.fixture(scope="session")
def quadratic_oracle():
    r, tipped = quadratic_grid_oracle()
    return grid_boundary(r, tipped)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from cooptree.space import Dataset, SampleSpace


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-scale slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def cells(p, rows):
    """Table dataset from a list of cell tuples (values 1/2)."""
    space = SampleSpace.table(p)
    return Dataset.from_points(space, np.asarray(rows, dtype=float).reshape(-1, p))


@pytest.fixture
def two_cell():
    """1-d table fixtures: identical (1,1)/(1,1) and disjoint (2,0)/(0,2)."""
    return {
        "identical": (cells(1, [[1], [2]]), cells(1, [[1], [2]])),
        "disjoint": (cells(1, [[1], [1]]), cells(1, [[2], [2]])),
    }


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for an acceptance criterion, then assert it."""

    def report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _CRITERIA[number] = line
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])

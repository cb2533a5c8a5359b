import pytest

from subsuper.exprlang import parse
from subsuper.gridfn import Grid, GridFunction

GREEN = "min(t,s)*(1-max(t,s))"

_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and rep.when == "call":
        number, text = marker.args
        _criteria.append((number, text, rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, text, outcome in sorted(_criteria):
        flag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{flag}] criterion {number:>2}: {text}")


@pytest.fixture
def grid():
    return Grid(201)


@pytest.fixture
def green():
    return parse(GREEN, {"t", "s"})


@pytest.fixture
def one(grid):
    return GridFunction.constant(grid, 1.0)

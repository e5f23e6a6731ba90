import pytest

from waypath.depgraph import DependencyGraph
from waypath.geometry import Contour, Model


def seg_contour(cid, pts, z=0.2, layer=0, closed=False):
    return Contour.from_points(cid, pts, z, layer, closed)


def model_of(*items, name="m"):
    """items: (xy_points, z, closed)"""
    return Model.from_contours(items, name)


@pytest.fixture
def chain():
    return DependencyGraph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def diamond():
    return DependencyGraph(4, [(0, 1), (0, 2), (1, 3), (2, 3)])


# (criterion, passed, detail) rows collected by the acceptance suite
ACCEPTANCE = []


def record_criterion(name, passed, detail):
    ACCEPTANCE.append((name, bool(passed), detail))
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")

import numpy as np
import pytest

from prioritycsma.graph import build_from_edges
from prioritycsma.errors import ConnectivityError


def random_connected_graph(rng: np.random.Generator, n: int, p: float = 0.5):
    """Random connected graph on ``n`` nodes (rejection on connectivity)."""
    if n == 1:
        return build_from_edges(1, [])
    while True:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        try:
            return build_from_edges(n, edges)
        except ConnectivityError:
            continue


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_criteria: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    marker = "test_acceptance.py::test_criterion_"
    if marker not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split(marker, 1)[1]
        num = int(name.split("_", 1)[0])
        _criteria[num] = (name, "PASS" if report.outcome == "passed" else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        name, verdict = _criteria[num]
        terminalreporter.write_line(f"criterion {num:2d}: {verdict}  ({name})")

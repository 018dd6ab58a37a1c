import math

import numpy as np
import pytest

from qgraph import library

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion:2d}: {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def tadpole_ks():
    return library.tadpole(1.0, math.sqrt(2))


@pytest.fixture(scope="session")
def tree5():
    from qgraph.graph import MetricGraph
    return MetricGraph.from_edges([(0, 1, 1.0), (1, 2, math.sqrt(2)), (1, 3, math.sqrt(3)),
                                   (3, 4, 0.7 * math.sqrt(5)), (3, 5, 0.9 * math.sqrt(7))])

import numpy as np
import pytest

from rclattice.lattice import build_box


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def block(g, rows, cols):
    """Vertex indices of a rectangular block of a 2-d box."""
    return np.array([g.index((r, c)) for r in rows for c in cols])


@pytest.fixture
def box5():
    return build_box(2, 5)


ACCEPTANCE_LINES: dict[int, str] = {}


def report(num: int, ok: bool, text: str) -> None:
    """Record and print one acceptance line."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {text}"
    ACCEPTANCE_LINES[num] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[num])

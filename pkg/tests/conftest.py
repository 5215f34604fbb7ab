import numpy as np
import pytest

from tvflow4 import stack_dynamics as S


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_stack(rng, n, max_facets=4):
    """Stack with 1..max_facets jumps in [0.5, 3], gaps of at least 0.05."""
    N = int(rng.integers(1, max_facets + 1))
    while True:
        R = np.sort(rng.uniform(0.5, 3.0, N))
        if N == 1 or np.min(np.diff(R)) >= 0.05:
            break
    return S.Stack(n, tuple(R), tuple(rng.uniform(-1.0, 1.0, N)))


ACCEPTANCE: dict = {}


def record(criterion: int, title: str, ok: bool, detail: str) -> None:
    """Store and print one PASS/FAIL line for an acceptance criterion."""
    line = f"criterion {criterion} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def random_pair(rng, N, cond=3.0):
    """Commuting (A, B) with Re sigma(A) > 0 built as Y diag Y^-1."""
    Y = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    Y += cond * np.eye(N)
    lamA = rng.uniform(0.5, 3, N) + 1j * rng.uniform(-2, 2, N)
    lamB = rng.uniform(-1, 2, N) + 1j * rng.uniform(-1, 1, N)
    Yi = np.linalg.inv(Y)
    return (Y * lamA) @ Yi, (Y * lamB) @ Yi


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

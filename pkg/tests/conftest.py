import numpy as np
import pytest

from oftsolve.converge import oracle_expansion
from oftsolve.oracle import find_eigenvalues

# filled by the acceptance tests, printed once at the end of the run
ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def basis20():
    return find_eigenvalues(10.0, 2.0, 20)


@pytest.fixture(scope="session")
def basis_wide():
    """Oracle basis on [-1, 1] with enough modes for convergence-problem references."""
    return find_eigenvalues(10.0, 2.0, 160, x_left=-1.0)


@pytest.fixture(scope="session")
def expansion_1d():
    return oracle_expansion(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

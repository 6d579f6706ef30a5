import numpy as np
import pytest

from andersonfp.datagen import gen_data_model_1
from andersonfp.operators import W1_DIAGONAL, make_diag_operator
from andersonfp.tyler import solve_reference


@pytest.fixture(scope="session")
def w1_operator():
    return make_diag_operator(W1_DIAGONAL)


@pytest.fixture(scope="session")
def model1_problem():
    return gen_data_model_1(20, 40, 1)


@pytest.fixture(scope="session")
def model1_reference(model1_problem):
    return solve_reference(model1_problem)


def random_symmetric(rng, n, radius=0.9):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(-radius, radius, n)
    W = (Q * lam) @ Q.T
    return 0.5 * (W + W.T)


# one line per acceptance criterion, echoed at the end of the run even without -s
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

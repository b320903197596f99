import numpy as np
import pytest

from soft_tp.constraint_model import build_sudoku_program


@pytest.fixture(scope="session")
def sudoku3():
    return build_sudoku_program(3)


@pytest.fixture(scope="session")
def sudoku2():
    return build_sudoku_program(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_board(rng, n, k, alpha=1.0):
    return rng.dirichlet(np.full(k, alpha), n)

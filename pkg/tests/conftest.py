import numpy as np
import pytest


def unit(i, j, n=2):
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_matrix():
    return unit

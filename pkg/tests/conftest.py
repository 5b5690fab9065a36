import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gauss(rng, p, n):
    return rng.standard_normal((p, n))

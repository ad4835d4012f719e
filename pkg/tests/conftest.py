import numpy as np
import pytest

from mixedlab import GridFunction


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def line16():
    return GridFunction.unit_box((16,))


@pytest.fixture
def square8():
    return GridFunction.unit_box((8, 8))

import numpy as np
import pytest

from eigenbasis import system_register, Family


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def two_qubits():
    return system_register(Family.TWISTED_PRODUCT)

import numpy as np
import pytest

from mdp.model import CostSequence, TabularMdp


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_mdp(rng):
    return TabularMdp.random(3, 2, 3, rng)


@pytest.fixture
def small_costs(rng, small_mdp):
    H, S, A = small_mdp.shape
    return CostSequence(rng.random((12, H, S, A)))

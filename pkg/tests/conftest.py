import numpy as np
import pytest
from hypothesis import settings

from multisaddle.random_experiments import RandomRecipe, random_system

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


def random_spd(rng, n, shift=1.0):
    R = rng.standard_normal((n, n))
    return R @ R.T + shift * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def system_k3():
    return random_system(RandomRecipe(3, seed=11))


@pytest.fixture
def tiny_k1():
    from multisaddle.saddle import BlockSaddleSystem

    return BlockSaddleSystem([np.array([[1.0]]), np.array([[0.0]])], [np.array([[1.0]])])

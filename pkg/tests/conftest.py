import pytest

from l1pca.linalg import random_signs, random_stiefel, seeded_rng
from l1pca.model import ProblemInstance


@pytest.fixture
def rng():
    return seeded_rng(20240613)


def make_instance(n, d, K, seed=0, scale=1.0):
    g = seeded_rng(seed, n, d, K)
    return ProblemInstance(scale * g.standard_normal((d, n)), K)


def make_start(inst, seed=0):
    g = seeded_rng(seed, 0xABCD)
    return random_signs(inst.n, inst.K, g), random_stiefel(inst.d, inst.K, g)

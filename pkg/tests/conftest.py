import logging

import numpy as np
import pytest

from mpelab import corpus
from mpelab.kernel import build_kernel
from mpelab.models import StateSpace


@pytest.fixture
def two_state():
    """x1 absorbing, x2 stays with probability 1/2."""
    return corpus.two_state(0.5).kernel


@pytest.fixture
def cyclic():
    return corpus.cyclic_three().kernel


@pytest.fixture
def rank_one():
    return build_kernel(StateSpace.integer(4), np.tile([0.1, 0.2, 0.3, 0.4], (4, 1)))


@pytest.fixture
def flip():
    """Deterministic 2-cycle, period 2."""
    return build_kernel(StateSpace.integer(2), [[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def random_kernel():
    def make(n: int, seed: int, concentration: float = 1.0):
        return corpus.dirichlet_kernel(n, np.random.default_rng(seed), concentration).kernel
    return make


@pytest.fixture
def logger():
    return logging.getLogger("mpelab.tests")

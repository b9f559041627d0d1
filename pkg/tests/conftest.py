import math

import numpy as np
import pytest

from toruslab.dynamics import HyperbolicToralMap
from toruslab.weakstar import TestFunctionFamily

# a library class, not a test case, despite the Test prefix
TestFunctionFamily.__test__ = False

LOG_LAMBDA = math.log((3.0 + math.sqrt(5.0)) / 2.0)


@pytest.fixture(scope="session")
def cat():
    return HyperbolicToralMap([[2, 1], [1, 1]])


@pytest.fixture(scope="session")
def golden():
    return HyperbolicToralMap([[1, 1], [1, 0]])


@pytest.fixture(scope="session")
def family():
    return TestFunctionFamily(33)


@pytest.fixture(scope="session")
def partition():
    from toruslab.markov import cat_map_partition
    return cat_map_partition()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)

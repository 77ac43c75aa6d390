import numpy as np
import pytest

from junction_bench.road_network import build_default_intersection


@pytest.fixture(scope="session")
def imap():
    return build_default_intersection()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

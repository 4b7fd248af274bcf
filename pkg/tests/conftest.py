import numpy as np
import pytest

from modelsel.classifiers import train_models
from modelsel.dataset import make_synthetic_benchmark


@pytest.fixture(scope="session")
def benchmark():
    return make_synthetic_benchmark()


@pytest.fixture(scope="session")
def models(benchmark):
    return train_models(benchmark)


@pytest.fixture(scope="session")
def seen_only_models(benchmark):
    return train_models(benchmark, joint_uses_aux=False)


@pytest.fixture
def rng():
    return np.random.default_rng(0)

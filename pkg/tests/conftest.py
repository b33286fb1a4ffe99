import os
import sys

import numpy as np
import pytest

# Add the repository root to Python path to resolve imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from blockreg.data_model import Hyperparameters, make_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def hyper():
    return Hyperparameters()


@pytest.fixture
def small_dataset():
    """40 individuals x 12 markers, markers 3 and 4 causal."""
    gen = np.random.default_rng(7)
    n, j = 40, 12
    X = gen.integers(0, 3, size=(n, j))
    X[0, :] = 0
    X[1, :] = 2
    beta = np.zeros(j)
    beta[[3, 4]] = 1.5
    y = X @ beta + gen.standard_normal(n)
    return make_dataset(X, y, positions_kb=np.arange(j) * 0.5, rho=np.full(j, 0.1))


@pytest.fixture(autouse=True)
def no_config_env(monkeypatch):
    monkeypatch.delenv("BLOCKREG_CONFIG", raising=False)
    monkeypatch.delenv("BLOCKREG_LOG_LEVEL", raising=False)

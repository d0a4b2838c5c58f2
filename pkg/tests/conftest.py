import logging

import numpy as np
import pytest

from dpp_model import TrainingSet

logging.getLogger().setLevel(logging.WARNING)


def _random_spd(n: int, rng: np.random.Generator, shift: float = 0.5) -> np.ndarray:
    X = rng.standard_normal((n, n))
    L = X @ X.T / n + shift * np.eye(n)
    return (L + L.T) / 2


def _random_training_set(ground_size: int, n: int, max_size: int, rng: np.random.Generator,
                         min_size: int = 1) -> TrainingSet:
    subsets = []
    for _ in range(n):
        k = int(rng.integers(min_size, max_size + 1))
        subsets.append(np.sort(rng.choice(ground_size, size=k, replace=False)))
    return TrainingSet(ground_size, subsets)


@pytest.fixture
def rng():
    return np.random.default_rng(20160613)


@pytest.fixture
def make_spd():
    return _random_spd


@pytest.fixture
def make_training_set():
    return _random_training_set

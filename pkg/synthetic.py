"""Synthetic kernels and training sets.

Factors are drawn as L_i = X^T X with the entries of X uniform on [0, sqrt(2)].
Training subsets are exact samples from a ground-truth kernel, either redrawn until their
size falls inside a window or drawn at a size chosen uniformly from the window.
"""
import logging
from typing import List, Sequence

import numpy as np
from tqdm import tqdm

from dpp_model import KronKernel, TrainingSet
from sampling import sample_kron, sample_kron_fixed_size

logger = logging.getLogger(__name__)

MAX_REJECTIONS = 10_000


def random_factor(n: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.uniform(0.0, np.sqrt(2.0), size=(n, n))
    L = X.T @ X
    return (L + L.T) / 2


def random_kron_kernel(dims: Sequence[int], rng: np.random.Generator) -> KronKernel:
    return KronKernel([random_factor(n, rng) for n in dims])


def draw_training_set(K: KronKernel, n_samples: int, min_size: int, max_size: int,
                      rng: np.random.Generator, max_rejections: int = MAX_REJECTIONS,
                      progress: bool = False) -> TrainingSet:
    """``n_samples`` exact draws whose sizes lie in [min_size, max_size]."""
    if min_size > max_size:
        raise ValueError(f"Empty size window [{min_size}, {max_size}]")
    eig = K.eig()
    subsets: List[List[int]] = []
    for sample in tqdm(range(n_samples), desc="Sampling training set", unit="subset", disable=not progress):
        for attempt in range(max_rejections):
            report = sample_kron(K, rng, eig)
            if min_size <= len(report.subset) <= max_size:
                subsets.append(report.subset)
                break
        else:
            raise ValueError(f"No sample of size in [{min_size}, {max_size}] after {max_rejections} draws "
                             f"(sample {sample}); the size window is infeasible for this kernel")
    logger.info(f"Drew {n_samples} subsets from a kernel of size {K.size}")
    return TrainingSet(K.size, subsets)


def draw_sized_training_set(K: KronKernel, n_samples: int, min_size: int, max_size: int,
                            rng: np.random.Generator, progress: bool = False) -> TrainingSet:
    """``n_samples`` exact draws with sizes uniform on [min_size, max_size], each conditioned on its size."""
    if min_size > max_size:
        raise ValueError(f"Empty size window [{min_size}, {max_size}]")
    eig = K.eig()
    subsets = []
    for _ in tqdm(range(n_samples), desc="Sampling training set", unit="subset", disable=not progress):
        k = int(rng.integers(min_size, max_size + 1))
        subsets.append(sample_kron_fixed_size(K, k, rng, eig).subset)
    logger.info(f"Drew {n_samples} fixed-size subsets from a kernel of size {K.size}")
    return TrainingSet(K.size, subsets)

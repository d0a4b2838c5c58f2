"""The data statistic Θ = (1/n) Σ U_i L_{Y_i}^{-1} U_i^T.

Two storage modes: a dense N x N matrix (batch updates), or a scipy COO matrix whose
nonzeros live on the union of the contributing subsets (stochastic and grouped
updates). The sparse mode never allocates an N x N buffer.
"""
import logging
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from dpp_model import KronKernel, TrainingSet, kron_submatrix, subset_inverse

logger = logging.getLogger(__name__)


class ThetaAccumulator:
    def __init__(self, size: int, n_contrib: int, dense: np.ndarray = None, coo: sp.coo_matrix = None):
        if (dense is None) == (coo is None):
            raise ValueError("ThetaAccumulator needs exactly one of dense or coo storage")
        self.size = int(size)
        self.n_contrib = int(n_contrib)
        self.dense = dense
        self.coo = coo

    @property
    def is_sparse(self) -> bool:
        return self.coo is not None

    @classmethod
    def from_dense(cls, matrix: np.ndarray, n_contrib: int = 1) -> "ThetaAccumulator":
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix.shape[0], n_contrib, dense=matrix)

    @classmethod
    def from_coordinates(cls, size: int, rows: np.ndarray, cols: np.ndarray, values: np.ndarray,
                         n_contrib: int) -> "ThetaAccumulator":
        coo = sp.coo_matrix((values, (rows, cols)), shape=(size, size))
        coo.sum_duplicates()
        return cls(size, n_contrib, coo=coo)

    def entry_count(self) -> int:
        if self.is_sparse:
            return int(self.coo.nnz)
        return int(self.dense.size)

    def densify(self) -> np.ndarray:
        if self.is_sparse:
            return self.coo.toarray()
        return self.dense


def _subset_blocks(K: KronKernel, subsets: Sequence[np.ndarray]):
    for Y in subsets:
        if len(Y):
            yield Y, subset_inverse(kron_submatrix(K, Y), Y)


def theta_batch(K: KronKernel, T: TrainingSet) -> ThetaAccumulator:
    if T.ground_size != K.size:
        raise ValueError(f"Training set ground size {T.ground_size} does not match kernel size {K.size}")
    theta = np.zeros((K.size, K.size))
    for Y, block in _subset_blocks(K, T.subsets):
        theta[np.ix_(Y, Y)] += block
    if T.n:
        theta /= T.n
    return ThetaAccumulator.from_dense(theta, T.n)


def accumulate_sparse(K: KronKernel, subsets: Sequence[np.ndarray], scale: float = 1.0) -> ThetaAccumulator:
    """scale * Σ U_i L_{Y_i}^{-1} U_i^T stored on the union of ``subsets``."""
    rows, cols, values = [], [], []
    for Y, block in _subset_blocks(K, subsets):
        r, c = np.meshgrid(Y, Y, indexing='ij')
        rows.append(r.ravel())
        cols.append(c.ravel())
        values.append(block.ravel() * scale)
    if rows:
        rows, cols, values = np.concatenate(rows), np.concatenate(cols), np.concatenate(values)
    else:
        rows = cols = np.zeros(0, dtype=np.intp)
        values = np.zeros(0)
    return ThetaAccumulator.from_coordinates(K.size, rows, cols, values, len(subsets))


def theta_sparse(K: KronKernel, minibatch: Sequence[np.ndarray]) -> ThetaAccumulator:
    """Sparse minibatch Θ, averaged over the minibatch."""
    if len(minibatch) == 0:
        raise ValueError("theta_sparse needs a nonempty minibatch")
    return accumulate_sparse(K, minibatch, scale=1.0 / len(minibatch))

"""L-ensemble DPP semantics for Kronecker and dense kernels.

All determinants are handled in the log domain through Cholesky factors.
"""
import logging
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la

from errors import DimensionError, IndexRangeError, NotPositiveDefiniteError, SingularSubmatrixError
from kron_linalg import KronEigenSystem, check_symmetric, kron_all, kron_eig, split_indices

logger = logging.getLogger(__name__)

JITTER_SCALE = 1e-10
INPUT_SYMMETRY_RTOL = 1e-12


def as_spd(M, name: str = "matrix") -> np.ndarray:
    M = np.array(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    check_symmetric(M, rtol=INPUT_SYMMETRY_RTOL)
    try:
        la.cholesky(M, lower=True)
    except la.LinAlgError:
        raise NotPositiveDefiniteError(float(np.linalg.eigvalsh(M)[0]))
    return M


class KronKernel:
    """L = L_1 ⊗ ... ⊗ L_m with positive definite factors."""

    def __init__(self, factors: Sequence[np.ndarray], validate: bool = True):
        if len(factors) == 0:
            raise DimensionError("A Kronecker kernel needs at least one factor")
        if validate:
            factors = [as_spd(f, name=f"factor {k + 1}") for k, f in enumerate(factors)]
        else:
            factors = [np.array(f, dtype=float) for f in factors]
        for f in factors:
            f.setflags(write=False)
        self.factors = tuple(factors)
        self.dims = tuple(f.shape[0] for f in self.factors)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    def materialize(self) -> np.ndarray:
        return kron_all(self.factors)

    def eig(self) -> KronEigenSystem:
        return kron_eig(self.factors)

    def __repr__(self):
        return f"KronKernel(dims={self.dims})"


def normalize_subset(indices: Iterable[int], ground_size: int) -> np.ndarray:
    """Sorted unique index array; raises on duplicates or out-of-range entries."""
    subset = np.sort(np.asarray(list(indices), dtype=np.intp))
    if subset.size and (subset[0] < 0 or subset[-1] >= ground_size):
        raise IndexRangeError(f"Subset indices must lie in [0, {ground_size})")
    if np.any(np.diff(subset) == 0):
        raise ValueError("Subset contains duplicate indices")
    return subset


def check_subset(subset: np.ndarray, ground_size: int):
    if subset.size == 0:
        return
    if subset[0] < 0 or subset[-1] >= ground_size:
        raise IndexRangeError(f"Subset indices must lie in [0, {ground_size})")
    if np.any(np.diff(subset) <= 0):
        raise ValueError("Subset indices must be strictly increasing")


class TrainingSet:
    """Ground-set size N plus observed subsets, each a strictly increasing index array."""

    def __init__(self, ground_size: int, subsets: Sequence[Sequence[int]]):
        self.ground_size = int(ground_size)
        checked = []
        for subset in subsets:
            subset = np.asarray(subset, dtype=np.intp)
            check_subset(subset, self.ground_size)
            subset.setflags(write=False)
            checked.append(subset)
        self.subsets: Tuple[np.ndarray, ...] = tuple(checked)

    @property
    def n(self) -> int:
        return len(self.subsets)

    @property
    def kappa(self) -> int:
        return max((len(s) for s in self.subsets), default=0)

    def max_index(self) -> int:
        return max((int(s[-1]) for s in self.subsets if len(s)), default=-1)

    def select(self, positions: Sequence[int]) -> "TrainingSet":
        return TrainingSet(self.ground_size, [self.subsets[p] for p in positions])

    def __len__(self):
        return self.n


def _check_ground(kernel_size: int, data: TrainingSet):
    if data.ground_size != kernel_size:
        raise DimensionError(f"Training set ground size {data.ground_size} does not match "
                             f"kernel size {kernel_size}")


def kron_entry(K: KronKernel, i: int, j: int) -> float:
    for index in (i, j):
        if not 0 <= index < K.size:
            raise IndexRangeError(f"Index {index} out of range for kernel of size {K.size}")
    rows = split_indices(np.array([i]), K.dims)
    cols = split_indices(np.array([j]), K.dims)
    value = 1.0
    for factor, r, c in zip(K.factors, rows, cols):
        value *= factor[r[0], c[0]]
    return float(value)


def kron_submatrix(K: KronKernel, Y: Sequence[int]) -> np.ndarray:
    """L_Y built from factor entries, without forming L."""
    Y = np.asarray(Y, dtype=np.intp)
    if Y.size == 0:
        return np.zeros((0, 0))
    if Y.min() < 0 or Y.max() >= K.size:
        raise IndexRangeError(f"Subset indices must lie in [0, {K.size})")
    parts = split_indices(Y, K.dims)
    sub = K.factors[0][np.ix_(parts[0], parts[0])]
    for factor, part in zip(K.factors[1:], parts[1:]):
        sub = sub * factor[np.ix_(part, part)]
    return sub


def factor_subset(L_Y: np.ndarray, subset: Sequence[int] = (), jitter_scale: float = JITTER_SCALE):
    """Cholesky factor of L_Y, retrying once with diagonal jitter."""
    try:
        return la.cho_factor(L_Y, lower=True)
    except la.LinAlgError:
        pass
    jitter = jitter_scale * np.trace(L_Y) / L_Y.shape[0]
    logger.warning(f"Submatrix of size {L_Y.shape[0]} is numerically singular; retrying with jitter {jitter:.3g}")
    try:
        return la.cho_factor(L_Y + jitter * np.eye(L_Y.shape[0]), lower=True)
    except la.LinAlgError:
        raise SingularSubmatrixError(subset)


def subset_logdet(L_Y: np.ndarray, subset: Sequence[int] = ()) -> float:
    if L_Y.shape[0] == 0:
        return 0.0
    c, _ = factor_subset(L_Y, subset)
    return 2.0 * float(np.log(np.diag(c)).sum())


def subset_inverse(L_Y: np.ndarray, subset: Sequence[int] = ()) -> np.ndarray:
    cf = factor_subset(L_Y, subset)
    inverse = la.cho_solve(cf, np.eye(L_Y.shape[0]))
    return (inverse + inverse.T) / 2


def log_det_norm(K: KronKernel, eig: Optional[KronEigenSystem] = None) -> float:
    """log det(I + L) from the factor eigenvalues."""
    eig = eig if eig is not None else K.eig()
    return float(np.log1p(eig.joint_values()).sum())


def log_likelihood(K: KronKernel, T: TrainingSet, eig: Optional[KronEigenSystem] = None) -> float:
    _check_ground(K.size, T)
    if T.n == 0:
        raise ValueError("Log-likelihood needs at least one observed subset")
    data_term = sum(subset_logdet(kron_submatrix(K, Y), Y) for Y in T.subsets)
    return data_term / T.n - log_det_norm(K, eig)


def log_likelihood_dense(L: np.ndarray, T: TrainingSet) -> float:
    _check_ground(L.shape[0], T)
    if T.n == 0:
        raise ValueError("Log-likelihood needs at least one observed subset")
    data_term = sum(subset_logdet(L[np.ix_(Y, Y)], Y) for Y in T.subsets)
    c, _ = la.cho_factor(np.eye(L.shape[0]) + L, lower=True)
    return data_term / T.n - 2.0 * float(np.log(np.diag(c)).sum())


def grad_delta(L: np.ndarray, T: TrainingSet) -> np.ndarray:
    """Δ = (1/n) Σ U_i L_{Y_i}^{-1} U_i^T - (I + L)^{-1} for a dense kernel."""
    _check_ground(L.shape[0], T)
    N = L.shape[0]
    theta = np.zeros((N, N))
    for Y in T.subsets:
        if len(Y):
            theta[np.ix_(Y, Y)] += subset_inverse(L[np.ix_(Y, Y)], Y)
    theta /= T.n
    inverse = la.cho_solve(la.cho_factor(np.eye(N) + L, lower=True), np.eye(N))
    delta = theta - inverse
    return (delta + delta.T) / 2


def marginal_kernel(L: np.ndarray) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    K = la.solve(np.eye(L.shape[0]) + L, L, assume_a='pos')
    return (K + K.T) / 2


def l_ensemble(K: np.ndarray) -> np.ndarray:
    """Inverse of ``marginal_kernel``: L = K (I - K)^{-1}, needs I - K invertible."""
    K = np.asarray(K, dtype=float)
    L = la.solve(np.eye(K.shape[0]) - K, K)
    return (L + L.T) / 2


def subset_prob(K: Union[KronKernel, np.ndarray], Y: Sequence[int],
                norm: Optional[float] = None) -> float:
    """P(Y) = det(L_Y) / det(L + I). ``norm`` may carry a precomputed log det(I + L)."""
    if isinstance(K, KronKernel):
        L_Y = kron_submatrix(K, Y)
        norm = log_det_norm(K) if norm is None else norm
    else:
        Y = np.asarray(Y, dtype=np.intp)
        L_Y = K[np.ix_(Y, Y)]
        if norm is None:
            norm = float(np.linalg.slogdet(np.eye(K.shape[0]) + K)[1])
    if L_Y.shape[0] == 0:
        return float(np.exp(-norm))
    sign, logdet = np.linalg.slogdet(L_Y)
    if sign <= 0:
        return 0.0
    return float(np.exp(logdet - norm))


def all_subsets(ground_size: int) -> List[Tuple[int, ...]]:
    subsets = []
    for mask in range(1 << ground_size):
        subsets.append(tuple(i for i in range(ground_size) if mask >> i & 1))
    return subsets

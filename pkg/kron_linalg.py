"""Dense symmetric linear algebra specialised to Kronecker products.

Index convention used everywhere in the project: zero-based, and the joint index of
a multi-index (i_1, ..., i_m) over factor sizes (N_1, ..., N_m) is row-major, so for two
factors i = i_1 * N_2 + i_2. This matches the block layout of ``np.kron``.
``vec`` stacks columns.
"""
import logging
from functools import reduce
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from errors import ConvergenceError, DimensionError, IndexRangeError, NotSymmetricError

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-9
POWER_TOL = 1e-10
POWER_MAX_ITER = 1000


class EigenSystem:
    """Orthonormal eigendecomposition A = P diag(values) P^T, values ascending."""

    def __init__(self, values: np.ndarray, vectors: np.ndarray):
        self.values = values
        self.vectors = vectors
        self.values.setflags(write=False)
        self.vectors.setflags(write=False)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


class KronEigenSystem:
    """Factor-wise eigendecomposition of L_1 ⊗ ... ⊗ L_m.

    The joint N x N eigenvector matrix is never formed; joint eigenvectors are built
    on request from products of factor coordinates.
    """

    def __init__(self, factors: List[EigenSystem]):
        self.factors = list(factors)
        self.dims = tuple(f.size for f in self.factors)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def joint_values(self) -> np.ndarray:
        return reduce(np.multiply.outer, [f.values for f in self.factors]).ravel()

    def sorted_order(self) -> np.ndarray:
        """Joint indices sorted by ascending eigenvalue, ties broken by multi-index."""
        return np.argsort(self.joint_values(), kind='stable')

    def sorted_values(self) -> np.ndarray:
        values = self.joint_values()
        return values[np.argsort(values, kind='stable')]

    def vector(self, joint_index: int) -> np.ndarray:
        parts = index_split(joint_index, self.dims)
        columns = [f.vectors[:, p] for f, p in zip(self.factors, parts)]
        return reduce(np.kron, columns)

    def joint_vectors(self, joint_indices: Sequence[int]) -> np.ndarray:
        """N x k block holding the joint eigenvectors for ``joint_indices``."""
        block = np.empty((self.size, len(joint_indices)))
        for column, joint_index in enumerate(joint_indices):
            block[:, column] = self.vector(int(joint_index))
        return block

    def materialize(self) -> EigenSystem:
        order = self.sorted_order()
        values = self.joint_values()[order]
        return EigenSystem(values, self.joint_vectors(order))


def kron_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(A, B)


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, factors)


def _check_blocked(M: np.ndarray, n1: int, n2: int):
    if M.ndim != 2 or M.shape != (n1 * n2, n1 * n2):
        raise DimensionError(f"Expected a {n1 * n2}x{n1 * n2} matrix for block sizes ({n1}, {n2}), "
                             f"got shape {M.shape}")


def partial_trace_1(M: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """n1 x n1 matrix of block traces, entry (i, j) = Tr(M_(ij))."""
    _check_blocked(M, n1, n2)
    return M.reshape(n1, n2, n1, n2).trace(axis1=1, axis2=3)


def partial_trace_2(M: np.ndarray, n1: int, n2: int) -> np.ndarray:
    _check_blocked(M, n1, n2)
    return M.reshape(n1, n2, n1, n2).trace(axis1=0, axis2=2)


def symmetrize(M: np.ndarray) -> np.ndarray:
    return (M + M.T) / 2


def check_symmetric(A: np.ndarray, rtol: float = SYMMETRY_RTOL):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {A.shape}")
    scale = max(np.abs(A).max(initial=0.0), 1.0)
    asymmetry = np.abs(A - A.T).max(initial=0.0)
    if asymmetry > rtol * scale:
        raise NotSymmetricError(f"Matrix is not symmetric (max |A - A^T| = {asymmetry:.3g})")


def sym_eig(A: np.ndarray) -> EigenSystem:
    A = np.asarray(A, dtype=float)
    check_symmetric(A)
    try:
        values, vectors = la.eigh(symmetrize(A))
    except la.LinAlgError as e:
        raise ConvergenceError(f"Symmetric eigendecomposition failed: {str(e)}") from e
    return EigenSystem(values, vectors)


def kron_eig(factors: Sequence[np.ndarray]) -> KronEigenSystem:
    if len(factors) == 0:
        raise DimensionError("kron_eig needs at least one factor")
    return KronEigenSystem([sym_eig(f) for f in factors])


def rearrange(M: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """Row i * n1 + j holds vec(M_(ij)); rank one exactly when M is a Kronecker product."""
    _check_blocked(M, n1, n2)
    return M.reshape(n1, n2, n1, n2).transpose(0, 2, 3, 1).reshape(n1 * n1, n2 * n2)


def unvec_left(u: np.ndarray, n1: int) -> np.ndarray:
    """Inverse of the row layout of ``rearrange``: U[i, j] = u[i * n1 + j]."""
    return u.reshape(n1, n1)


def unvec(v: np.ndarray, n2: int) -> np.ndarray:
    return v.reshape(n2, n2, order='F')


def _fix_sign(u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    magnitude = np.abs(u)
    first = int(np.flatnonzero(magnitude > 1e-14 * magnitude.max())[0])
    if u[first] < 0:
        return -u, -v
    return u, v


def leading_singular_pair(R: np.ndarray, tol: float = POWER_TOL,
                          max_iter: int = POWER_MAX_ITER) -> Tuple[np.ndarray, float, np.ndarray]:
    """Leading singular triple (u, sigma, v) of R by alternating power iteration.

    Starts from the normalised all-ones vector and stops once ||R v - sigma u|| <= tol * sigma.
    The sign is fixed so that the first nonzero coordinate of u is positive.
    """
    R = np.asarray(R, dtype=float)
    if not np.any(R):
        raise ValueError("Leading singular pair of a zero matrix is undefined")

    v = np.ones(R.shape[1]) / np.sqrt(R.shape[1])
    if not np.any(R @ v):
        v = np.zeros(R.shape[1])
        v[int(np.argmax(np.linalg.norm(R, axis=0)))] = 1.0

    for iteration in range(1, max_iter + 1):
        u = R @ v
        u /= np.linalg.norm(u)
        w = R.T @ u
        sigma = float(np.linalg.norm(w))
        v = w / sigma
        residual = np.linalg.norm(R @ v - sigma * u)
        if residual <= tol * sigma:
            logger.debug(f"Power method converged after {iteration} iterations (sigma={sigma:.6g})")
            u, v = _fix_sign(u, v)
            return u, sigma, v

    raise ConvergenceError(f"Power method did not converge within {max_iter} iterations "
                           f"(residual {residual:.3g}); the leading singular gap is too small")


def nearest_kron(M: np.ndarray, n1: int, n2: int, tol: float = POWER_TOL,
                 max_iter: int = POWER_MAX_ITER) -> Tuple[np.ndarray, np.ndarray]:
    """Factors (X, Y) minimising ||M - X ⊗ Y||_F with ||X||_F = ||Y||_F.

    For positive definite M both factors come out positive definite: the leading
    singular vectors are both definite, and the sign of U[0, 0] tells which way.
    """
    u, sigma, v = leading_singular_pair(rearrange(M, n1, n2), tol, max_iter)
    U = symmetrize(unvec_left(u, n1))
    V = symmetrize(unvec(v, n2))
    alpha = np.sign(U[0, 0]) * np.sqrt(sigma)
    return alpha * U, (sigma / alpha) * V


def index_join(parts: Sequence[int], dims: Sequence[int]) -> int:
    if len(parts) != len(dims):
        raise DimensionError(f"Multi-index {tuple(parts)} does not match factor sizes {tuple(dims)}")
    joint = 0
    for part, dim in zip(parts, dims):
        if not 0 <= part < dim:
            raise IndexRangeError(f"Index {part} out of range for factor of size {dim}")
        joint = joint * dim + int(part)
    return joint


def index_split(i: int, dims: Sequence[int]) -> Tuple[int, ...]:
    size = int(np.prod(dims))
    if not 0 <= i < size:
        raise IndexRangeError(f"Joint index {i} out of range for ground set of size {size}")
    parts = []
    for dim in reversed(dims):
        i, part = divmod(int(i), dim)
        parts.append(part)
    return tuple(reversed(parts))


def split_indices(indices: np.ndarray, dims: Sequence[int]) -> Tuple[np.ndarray, ...]:
    """Vectorised ``index_split`` for an array of joint indices (no range check)."""
    return np.unravel_index(np.asarray(indices, dtype=np.intp), tuple(dims))

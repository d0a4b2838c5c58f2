"""Exact two-phase DPP sampling for dense and Kronecker kernels."""
import logging
import time
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from dpp_model import KronKernel, all_subsets, log_det_norm, subset_prob
from errors import ConvergenceError, EnumerationLimitError
from kron_linalg import EigenSystem, KronEigenSystem
from models import SampleReport

logger = logging.getLogger(__name__)

EIGENVALUE_CLAMP = 1e-14
ORTHO_TOL = 1e-12
ENUMERATION_CAP = 20


def _clamped(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.where(values < EIGENVALUE_CLAMP, 0.0, values)


def select_elementary(values: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Phase 1: keep eigen-index i with probability λ_i / (λ_i + 1)."""
    values = np.asarray(values, dtype=float)
    if np.any(values < -EIGENVALUE_CLAMP):
        raise ValueError(f"Eigenvalues must be nonnegative, got min {values.min():.3g}")
    values = _clamped(values)
    draws = rng.random(values.shape[0])
    return np.flatnonzero(draws < values / (values + 1.0))


def elementary_symmetric(values: Sequence[float], k: int) -> np.ndarray:
    """E[l, n] = e_l(values[:n]) for l <= k."""
    values = np.asarray(values, dtype=float)
    E = np.zeros((k + 1, values.shape[0] + 1))
    E[0, :] = 1.0
    for l in range(1, k + 1):
        E[l, 1:] = np.cumsum(values * E[l - 1, :-1])
    return E


def select_elementary_fixed_size(values: Sequence[float], k: int, rng: np.random.Generator) -> np.ndarray:
    """Phase 1 conditioned on |J| = k: J is drawn with probability proportional to Π_{i in J} λ_i."""
    values = np.asarray(values, dtype=float)
    if np.any(values < -EIGENVALUE_CLAMP):
        raise ValueError(f"Eigenvalues must be nonnegative, got min {values.min():.3g}")
    values = _clamped(values)
    rank = int(np.count_nonzero(values))
    if not 0 <= k <= rank:
        raise ValueError(f"Cannot draw {k} items from a kernel of rank {rank}")
    if k == 0:
        return np.zeros(0, dtype=np.intp)
    # the conditional law is invariant under scaling L
    values = values / values.max()
    E = elementary_symmetric(values, k)
    selected = []
    remaining = k
    for n in range(values.shape[0], 0, -1):
        if remaining == 0:
            break
        if rng.random() < values[n - 1] * E[remaining - 1, n - 1] / E[remaining, n]:
            selected.append(n - 1)
            remaining -= 1
    if remaining:
        raise ConvergenceError(f"Fixed-size selection stopped {remaining} short of {k} (eigenvalue underflow)")
    return np.array(sorted(selected), dtype=np.intp)


def expected_size(values: Sequence[float]) -> float:
    values = _clamped(values)
    return float((values / (1.0 + values)).sum())


def _orthogonal_complement(V: np.ndarray, i: int) -> np.ndarray:
    """Orthonormal basis of the subspace of span(V) orthogonal to e_i."""
    j = int(np.argmax(np.abs(V[i, :])))
    pivot = V[:, j].copy()
    V = np.delete(V, j, axis=1)
    if V.shape[1] == 0:
        return V
    V = V - np.outer(pivot, V[i, :] / pivot[i])
    V[i, :] = 0.0
    # modified Gram-Schmidt, each normalised column projected out of the later ones
    for column in range(V.shape[1]):
        norm = np.linalg.norm(V[:, column])
        if norm < ORTHO_TOL:
            raise ConvergenceError(f"Orthonormalisation lost rank (column norm {norm:.3g})")
        V[:, column] /= norm
        rest = V[:, column + 1:]
        rest -= np.outer(V[:, column], V[:, column] @ rest)
    return V


def sample_from_basis(V: np.ndarray, rng: np.random.Generator) -> List[int]:
    """Phase 2 of the exact sampler for an orthonormal N x k basis."""
    items = []
    while V.shape[1] > 0:
        weights = np.sum(V ** 2, axis=1) / V.shape[1]
        cumulative = np.cumsum(weights)
        i = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side='right'))
        i = min(i, V.shape[0] - 1)
        items.append(i)
        V = _orthogonal_complement(V, i)
    return sorted(items)


def sample_dense(eig: EigenSystem, rng: np.random.Generator) -> SampleReport:
    start = time.perf_counter()
    selected = select_elementary(eig.values, rng)
    phase1 = time.perf_counter()
    V = np.array(eig.vectors[:, selected])
    subset = sample_from_basis(V, rng)
    phase2 = time.perf_counter()
    return SampleReport(subset=subset, selected=[int(s) for s in selected],
                        timings={"select": phase1 - start, "project": phase2 - phase1})


def sample_kron(K: KronKernel, rng: np.random.Generator, eig: Optional[KronEigenSystem] = None) -> SampleReport:
    """Exact sample from a Kronecker kernel; joint eigenvectors are built only for selected indices.

    Eigenvalues are sorted ascending before phase 1, so with the same stream the draw
    matches ``sample_dense`` on the materialised kernel.
    """
    start = time.perf_counter()
    eig = eig if eig is not None else K.eig()
    order = eig.sorted_order()
    values = eig.joint_values()[order]
    decomposed = time.perf_counter()
    selected = select_elementary(values, rng)
    phase1 = time.perf_counter()
    V = eig.joint_vectors(order[selected])
    subset = sample_from_basis(V, rng)
    phase2 = time.perf_counter()
    return SampleReport(subset=subset, selected=[int(s) for s in selected],
                        timings={"eig": decomposed - start, "select": phase1 - decomposed,
                                 "project": phase2 - phase1})


def sample_kron_fixed_size(K: KronKernel, k: int, rng: np.random.Generator,
                           eig: Optional[KronEigenSystem] = None) -> SampleReport:
    """Exact sample of exactly ``k`` items, P(Y) proportional to det(L_Y) over |Y| = k."""
    eig = eig if eig is not None else K.eig()
    order = eig.sorted_order()
    selected = select_elementary_fixed_size(eig.joint_values()[order], k, rng)
    subset = sample_from_basis(eig.joint_vectors(order[selected]), rng)
    return SampleReport(subset=subset, selected=[int(s) for s in selected])


def enumerate_distribution(K: Union[KronKernel, np.ndarray],
                           cap: int = ENUMERATION_CAP) -> Dict[Tuple[int, ...], float]:
    """P(Y) for every subset Y, by brute force."""
    size = K.size if isinstance(K, KronKernel) else np.asarray(K).shape[0]
    if size > cap:
        raise EnumerationLimitError(f"Refusing to enumerate 2^{size} subsets (cap is N <= {cap})")
    if isinstance(K, KronKernel):
        norm = log_det_norm(K)
    else:
        K = np.asarray(K, dtype=float)
        norm = float(np.linalg.slogdet(np.eye(size) + K)[1])
    return {Y: subset_prob(K, Y, norm) for Y in all_subsets(size)}


def empirical_distribution(draws: Sequence[Sequence[int]]) -> Dict[Tuple[int, ...], float]:
    counts: Dict[Tuple[int, ...], int] = {}
    for draw in draws:
        key = tuple(draw)
        counts[key] = counts.get(key, 0) + 1
    return {key: count / len(draws) for key, count in counts.items()}


def total_variation(p: Dict[Tuple[int, ...], float], q: Dict[Tuple[int, ...], float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)

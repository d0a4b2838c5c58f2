"""Maximum-likelihood kernel learning: Picard, KrK-Picard and Joint-Picard.

The KrK-Picard factor updates never form L, L Δ L or (I + L)^{-1}: the data part of
Δ enters through block traces of Θ, the normalisation part through the factor
eigendecompositions.
"""
import logging
import time
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
import scipy.linalg as la
from tqdm import tqdm

from dpp_model import (KronKernel, TrainingSet, grad_delta, log_likelihood, log_likelihood_dense)
from errors import DimensionError, NotPositiveDefiniteError
from kron_linalg import (leading_singular_pair, rearrange, sym_eig, symmetrize, unvec, unvec_left,
                         POWER_MAX_ITER, POWER_TOL)
from models import FitConfig, FitHistory
from theta import ThetaAccumulator, theta_batch, theta_sparse

logger = logging.getLogger(__name__)

PD_FLOOR = 1e-10


def check_pd(M: np.ndarray, floor: float = PD_FLOOR) -> np.ndarray:
    """Symmetrised M, after verifying its smallest eigenvalue exceeds ``floor``."""
    S = symmetrize(np.asarray(M, dtype=float))
    try:
        la.cholesky(S - floor * np.eye(S.shape[0]), lower=True)
    except la.LinAlgError:
        raise NotPositiveDefiniteError(float(la.eigvalsh(S)[0]), floor)
    return S


def min_eigenvalue(M: np.ndarray) -> float:
    return float(la.eigvalsh(M, subset_by_index=[0, 0])[0])


def picard_step(L: np.ndarray, T: TrainingSet, a: float, floor: float = PD_FLOOR) -> np.ndarray:
    if a == 0:
        return L
    delta = grad_delta(L, T)
    return check_pd(L + a * (L @ delta @ L), floor)


def _factor1_data_term(theta: ThetaAccumulator, L2: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """A[k, l] = Tr(Θ_(kl) L_2)."""
    if theta.is_sparse:
        coo = theta.coo
        k_p, r_p = np.divmod(coo.row, n2)
        k_q, s_q = np.divmod(coo.col, n2)
        A = np.zeros((n1, n1))
        np.add.at(A, (k_p, k_q), coo.data * L2[s_q, r_p])
        return A
    return np.einsum('krls,sr->kl', theta.dense.reshape(n1, n2, n1, n2), L2)


def _factor2_data_term(theta: ThetaAccumulator, L1: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """C = Σ_ij L_1[i, j] Θ_(ij)."""
    if theta.is_sparse:
        coo = theta.coo
        k_p, r_p = np.divmod(coo.row, n2)
        k_q, s_q = np.divmod(coo.col, n2)
        C = np.zeros((n2, n2))
        np.add.at(C, (r_p, s_q), coo.data * L1[k_p, k_q])
        return C
    return np.einsum('kl,krls->rs', L1, theta.dense.reshape(n1, n2, n1, n2))


def _check_theta(L1: np.ndarray, L2: np.ndarray, theta: ThetaAccumulator):
    if theta.size != L1.shape[0] * L2.shape[0]:
        raise DimensionError(f"Θ has size {theta.size}, expected {L1.shape[0]}*{L2.shape[0]}")


def krk_step_factor1(L1: np.ndarray, L2: np.ndarray, theta: ThetaAccumulator, a: float,
                     floor: float = PD_FLOOR) -> np.ndarray:
    """L_1 + (a / N_2) Tr_1((I ⊗ L_2^{-1}) L Δ L), as L_1 (A - B) L_1."""
    _check_theta(L1, L2, theta)
    if a == 0:
        return L1
    n1, n2 = L1.shape[0], L2.shape[0]
    eig1, eig2 = sym_eig(L1), sym_eig(L2)
    d1, d2, P1 = eig1.values, eig2.values, eig1.vectors

    A = _factor1_data_term(theta, L2, n1, n2)
    alpha = (d2[None, :] / (1.0 + np.outer(d1, d2))).sum(axis=1)
    L1BL1 = (P1 * (d1 * d1 * alpha)) @ P1.T

    step = L1 @ A @ L1 - L1BL1
    return check_pd(L1 + (a / n2) * step, floor)


def krk_step_factor2(L1: np.ndarray, L2: np.ndarray, theta: ThetaAccumulator, a: float,
                     floor: float = PD_FLOOR) -> np.ndarray:
    """L_2 + (a / N_1) Tr_2((L_1^{-1} ⊗ I) L Δ L), as A - B."""
    _check_theta(L1, L2, theta)
    if a == 0:
        return L2
    n1, n2 = L1.shape[0], L2.shape[0]
    eig1, eig2 = sym_eig(L1), sym_eig(L2)
    d1, d2, P1, P2 = eig1.values, eig2.values, eig1.vectors, eig2.vectors

    A = L2 @ _factor2_data_term(theta, L1, n1, n2) @ L2
    # diagonal of (I ⊗ D_2)(I + D_1 ⊗ D_2)^{-1}(D_1 ⊗ D_2), one row per factor-1 eigenvalue
    prod = np.outer(d1, d2)
    Lam = d2[None, :] * prod / (1.0 + prod)
    weights = (P1 ** 2).sum(axis=0) @ Lam
    B = (P2 * weights) @ P2.T

    return check_pd(L2 + (a / n1) * (A - B), floor)


def inverse_identity_plus(L1: np.ndarray, L2: np.ndarray) -> np.ndarray:
    """Dense (I + L_1 ⊗ L_2)^{-1} from the factor eigendecompositions."""
    eig1, eig2 = sym_eig(L1), sym_eig(L2)
    n1, n2 = L1.shape[0], L2.shape[0]
    D = 1.0 / (1.0 + np.outer(eig1.values, eig2.values))
    P1, P2 = eig1.vectors, eig2.vectors
    out = np.einsum('ik,jk,kt,rt,st->irjs', P1, P1, D, P2, P2, optimize=True)
    return symmetrize(out.reshape(n1 * n2, n1 * n2))


def kron_delta(L1: np.ndarray, L2: np.ndarray, T: TrainingSet) -> np.ndarray:
    kernel = KronKernel([L1, L2], validate=False)
    return theta_batch(kernel, T).densify() - inverse_identity_plus(L1, L2)


def joint_picard_update(L1: np.ndarray, L2: np.ndarray, delta: np.ndarray, a: float,
                        floor: float = PD_FLOOR, tol: float = POWER_TOL,
                        max_iter: int = POWER_MAX_ITER) -> Tuple[np.ndarray, np.ndarray]:
    """Re-project L + L Δ L onto Kronecker structure through the rearrangement of L^{-1} + Δ."""
    if a == 0:
        return L1, L2
    n1, n2 = L1.shape[0], L2.shape[0]
    inv1 = la.cho_solve(la.cho_factor(L1, lower=True), np.eye(n1))
    inv2 = la.cho_solve(la.cho_factor(L2, lower=True), np.eye(n2))
    M = np.kron(symmetrize(inv1), symmetrize(inv2)) + delta

    u, sigma, v = leading_singular_pair(rearrange(M, n1, n2), tol, max_iter)
    U = symmetrize(unvec_left(u, n1))
    V = symmetrize(unvec(v, n2))
    LUL = L1 @ U @ L1
    LVL = L2 @ V @ L2
    alpha = np.sign(U[0, 0]) * np.sqrt(sigma * np.linalg.norm(LVL) / np.linalg.norm(LUL))
    logger.debug(f"Joint projection: sigma={sigma:.6g}, alpha={alpha:.6g}")

    new1 = L1 + a * (alpha * LUL - L1)
    new2 = L2 + a * ((sigma / alpha) * LVL - L2)
    return check_pd(new1, floor), check_pd(new2, floor)


def joint_picard_step(L1: np.ndarray, L2: np.ndarray, T: TrainingSet, a: float,
                      floor: float = PD_FLOOR, tol: float = POWER_TOL,
                      max_iter: int = POWER_MAX_ITER) -> Tuple[np.ndarray, np.ndarray]:
    if a == 0:
        return L1, L2
    return joint_picard_update(L1, L2, kron_delta(L1, L2, T), a, floor, tol, max_iter)


def _with_backoff(step: Callable[[float], object], cfg: FitConfig, iteration: int, factor: str):
    """Run ``step(a)``, halving a for this step only while the result is not PD."""
    a = cfg.step_size
    for attempt in range(cfg.max_halvings + 1):
        try:
            return step(a)
        except NotPositiveDefiniteError as e:
            failure = e
            logger.info(f"Iteration {iteration}: {factor} update lost positive definiteness "
                        f"(min eigenvalue {e.min_eigenvalue:.3g}); retrying with step size {a / 2:g}")
            a /= 2
    raise failure.located(iteration, factor)


def _converged(previous: float, current: float, tol: float) -> bool:
    return abs(current - previous) < tol * abs(previous)


def minibatches(n: int, size: int, rng: np.random.Generator) -> Iterator[List[int]]:
    """Endless stream of minibatches, sampled without replacement within each epoch."""
    while True:
        order = rng.permutation(n)
        for start in range(0, n, size):
            yield [int(p) for p in order[start:start + size]]


def _check_training(size: int, T: TrainingSet):
    if T.ground_size != size:
        raise DimensionError(f"Training set ground size {T.ground_size} does not match kernel size {size}")
    if T.n == 0:
        raise ValueError("Learning needs at least one observed subset")


def fit_krk(K0: KronKernel, T: TrainingSet, cfg: Optional[FitConfig] = None) -> Tuple[KronKernel, FitHistory]:
    """KrK-Picard: alternate the two factor updates, batch or stochastic."""
    cfg = cfg or FitConfig()
    if K0.n_factors != 2:
        raise DimensionError(f"KrK-Picard learns two factors, kernel has {K0.n_factors}")
    _check_training(K0.size, T)
    L1, L2 = K0.factors
    previous = log_likelihood(K0, T)
    history = FitHistory(initial_loglik=previous, initial_min_eig=min(min_eigenvalue(L1), min_eigenvalue(L2)))
    if cfg.max_iter == 0:
        return K0, history

    stochastic = cfg.mode == "stochastic"
    batches = minibatches(T.n, cfg.minibatch_size, np.random.default_rng(cfg.seed))
    elapsed = 0.0
    logger.info(f"KrK-Picard ({cfg.mode}) on N={K0.size} ({K0.dims[0]}x{K0.dims[1]}), "
                f"n={T.n}, kappa={T.kappa}; initial log-likelihood {previous:.6f}")

    for iteration in tqdm(range(1, cfg.max_iter + 1), desc="KrK-Picard", unit="iter", disable=not cfg.progress):
        start = time.perf_counter()
        if stochastic:
            subsets = [T.subsets[p] for p in next(batches)]

            def compute_theta(A, B):
                return theta_sparse(KronKernel([A, B], validate=False), subsets)
        else:
            def compute_theta(A, B):
                return theta_batch(KronKernel([A, B], validate=False), T)

        theta = compute_theta(L1, L2)
        L1 = _with_backoff(lambda a: krk_step_factor1(L1, L2, theta, a, cfg.pd_floor), cfg, iteration, "L1")
        theta = compute_theta(L1, L2)
        L2 = _with_backoff(lambda a: krk_step_factor2(L1, L2, theta, a, cfg.pd_floor), cfg, iteration, "L2")
        elapsed += time.perf_counter() - start

        loglik = log_likelihood(KronKernel([L1, L2], validate=False), T)
        history.append(iteration, elapsed, loglik, min(min_eigenvalue(L1), min_eigenvalue(L2)))
        logger.debug(f"KrK-Picard iteration {iteration}: log-likelihood {loglik:.10f}")
        if not stochastic and _converged(previous, loglik, cfg.tol):
            logger.info(f"KrK-Picard converged after {iteration} iterations")
            break
        previous = loglik

    return KronKernel([L1, L2], validate=False), history


def fit_picard(L0: np.ndarray, T: TrainingSet, cfg: Optional[FitConfig] = None) -> Tuple[np.ndarray, FitHistory]:
    """Dense Picard baseline with the same stopping rules as ``fit_krk``."""
    cfg = cfg or FitConfig()
    _check_training(L0.shape[0], T)
    L = L0
    previous = log_likelihood_dense(L, T)
    history = FitHistory(initial_loglik=previous, initial_min_eig=min_eigenvalue(L))
    if cfg.max_iter == 0:
        return L0, history

    elapsed = 0.0
    logger.info(f"Picard on N={L.shape[0]}, n={T.n}; initial log-likelihood {previous:.6f}")

    for iteration in tqdm(range(1, cfg.max_iter + 1), desc="Picard", unit="iter", disable=not cfg.progress):
        start = time.perf_counter()
        L = _with_backoff(lambda a: picard_step(L, T, a, cfg.pd_floor), cfg, iteration, "L")
        elapsed += time.perf_counter() - start

        loglik = log_likelihood_dense(L, T)
        history.append(iteration, elapsed, loglik, min_eigenvalue(L))
        logger.debug(f"Picard iteration {iteration}: log-likelihood {loglik:.10f}")
        if _converged(previous, loglik, cfg.tol):
            logger.info(f"Picard converged after {iteration} iterations")
            break
        previous = loglik

    return L, history


def fit_joint(K0: KronKernel, T: TrainingSet, cfg: Optional[FitConfig] = None) -> Tuple[KronKernel, FitHistory]:
    """Joint-Picard loop; no ascent guarantee, same stopping rules as ``fit_krk``."""
    cfg = cfg or FitConfig()
    if K0.n_factors != 2:
        raise DimensionError(f"Joint-Picard learns two factors, kernel has {K0.n_factors}")
    _check_training(K0.size, T)
    L1, L2 = K0.factors
    previous = log_likelihood(K0, T)
    history = FitHistory(initial_loglik=previous, initial_min_eig=min(min_eigenvalue(L1), min_eigenvalue(L2)))
    if cfg.max_iter == 0:
        return K0, history

    elapsed = 0.0
    logger.info(f"Joint-Picard on N={K0.size}, n={T.n}; initial log-likelihood {previous:.6f}")

    for iteration in tqdm(range(1, cfg.max_iter + 1), desc="Joint-Picard", unit="iter", disable=not cfg.progress):
        start = time.perf_counter()
        delta = kron_delta(L1, L2, T)
        L1, L2 = _with_backoff(
            lambda a: joint_picard_update(L1, L2, delta, a, cfg.pd_floor, cfg.power_tol, cfg.power_max_iter),
            cfg, iteration, "L1,L2")
        elapsed += time.perf_counter() - start

        loglik = log_likelihood(KronKernel([L1, L2], validate=False), T)
        history.append(iteration, elapsed, loglik, min(min_eigenvalue(L1), min_eigenvalue(L2)))
        logger.debug(f"Joint-Picard iteration {iteration}: log-likelihood {loglik:.10f}")
        if _converged(previous, loglik, cfg.tol):
            logger.info(f"Joint-Picard converged after {iteration} iterations")
            break
        previous = loglik

    return KronKernel([L1, L2], validate=False), history

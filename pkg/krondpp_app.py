import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config_manager import Settings
from dpp_model import KronKernel, TrainingSet, log_likelihood
from errors import DimensionError
from kernel_store import KernelStore
from kron_linalg import nearest_kron
from learning import fit_joint, fit_krk, fit_picard
from models import FitHistory, PartitionPlan
from partitioning import greedy_partition
from sampling import sample_kron
from synthetic import draw_sized_training_set, draw_training_set, random_kron_kernel

logger = logging.getLogger(__name__)

ALGORITHMS = ("krk", "picard", "joint")
BENCH_ALGORITHMS = ("krk", "krk-stochastic", "picard", "joint")


class KronDppApp:
    """One method per command; each logs failures and re-raises them to the caller."""

    def __init__(self, settings: Optional[Settings] = None, debug_mode: bool = False):
        self.settings = settings or Settings()
        self.store = KernelStore()
        self.debug_mode = debug_mode
        if self.debug_mode:
            logging.getLogger().setLevel(logging.DEBUG)

    def cmd_synth(self, n1: int, n2: int, n_samples: int, min_size: int, max_size: int,
                  seed: int, out_kernel: str, out_subsets: str,
                  size_mode: str = "reject") -> Tuple[KronKernel, TrainingSet]:
        try:
            if min(n1, n2) < 1 or n_samples < 0:
                raise ValueError("Factor sizes must be positive and the sample count non-negative")
            if min_size < 1:
                raise ValueError("Training subsets must be non-empty (min size >= 1)")
            rng = np.random.default_rng(seed)
            kernel = random_kron_kernel((n1, n2), rng)
            if size_mode == "uniform":
                data = draw_sized_training_set(kernel, n_samples, min_size, min(max_size, kernel.size), rng,
                                               progress=self.settings.progress)
            elif size_mode == "reject":
                data = draw_training_set(kernel, n_samples, min_size, max_size, rng,
                                         max_rejections=self.settings.max_rejections,
                                         progress=self.settings.progress)
            else:
                raise ValueError(f"Unknown size mode '{size_mode}' (expected reject or uniform)")
            self.store.save_kernel(kernel, out_kernel)
            self.store.save_subsets(out_subsets, data.subsets)
            return kernel, data
        except Exception as e:
            logger.error(f"Error generating synthetic data: {str(e)}")
            raise

    def initial_kernel(self, n1: int, n2: int, algo: str, init: str, seed: int,
                       kernel_in: Optional[str] = None) -> KronKernel:
        """Two-factor start point; a one-factor (dense) file is projected unless training Picard."""
        if init == "random":
            return random_kron_kernel((n1, n2), np.random.default_rng(seed))
        if init != "file":
            raise ValueError(f"Unknown init '{init}' (expected random or file)")
        if not kernel_in:
            raise ValueError("--init file needs --kernel-in")

        kernel = self.store.load_kernel(kernel_in)
        if kernel.size != n1 * n2:
            raise DimensionError(f"Initial kernel has size {kernel.size}, expected {n1}*{n2}={n1 * n2}")
        if kernel.n_factors == 2 and kernel.dims == (n1, n2):
            return kernel
        if kernel.n_factors == 1:
            if algo == "picard":
                return kernel
            logger.info(f"Projecting dense initial kernel onto {n1}x{n2} Kronecker factors")
            L1, L2 = nearest_kron(kernel.factors[0], n1, n2, self.settings.power_tol,
                                  self.settings.power_max_iter)
            return KronKernel([L1, L2])
        raise DimensionError(f"Initial kernel factors {kernel.dims} do not match ({n1}, {n2})")

    def _fit(self, algo: str, K0: KronKernel, data: TrainingSet, cfg) -> Tuple[KronKernel, FitHistory]:
        if algo == "krk":
            return fit_krk(K0, data, cfg)
        if algo == "joint":
            return fit_joint(K0, data, cfg)
        if algo == "picard":
            L, history = fit_picard(K0.materialize(), data, cfg)
            return KronKernel([L], validate=False), history
        raise ValueError(f"Unknown algorithm '{algo}' (expected one of {', '.join(ALGORITHMS)})")

    def cmd_train(self, data: str, n1: int, n2: int, out_kernel: str, trace: str, algo: str = "krk",
                  mode: str = "batch", minibatch: int = 1, iters: int = 100, step: Optional[float] = None,
                  tol: Optional[float] = None, seed: int = 0, init: str = "random",
                  kernel_in: Optional[str] = None) -> Tuple[KronKernel, FitHistory]:
        try:
            if algo not in ALGORITHMS:
                raise ValueError(f"Unknown algorithm '{algo}' (expected one of {', '.join(ALGORITHMS)})")
            if mode == "stochastic" and algo != "krk":
                raise ValueError("Stochastic mode is only available for krk")
            training = self.store.load_subsets(data, n1 * n2)
            K0 = self.initial_kernel(n1, n2, algo, init, seed, kernel_in)
            cfg = self.settings.fit_config(step_size=step, tol=tol, max_iter=iters, mode=mode,
                                           minibatch_size=minibatch, seed=seed)
            logger.info(f"Training {algo} ({mode}) on {data}: N={n1 * n2}, n={training.n}, kappa={training.kappa}")

            kernel, history = self._fit(algo, K0, training, cfg)
            self.store.save_kernel(kernel, out_kernel)
            self.store.save_trace(trace, history)
            logger.info(f"Final log-likelihood {history.final_loglik():.10f} after {len(history)} iterations")
            return kernel, history
        except Exception as e:
            logger.error(f"Error during training: {str(e)}")
            raise

    def cmd_sample(self, kernel: str, count: int, seed: int, out: str) -> List[List[int]]:
        try:
            K = self.store.load_kernel(kernel)
            rng = np.random.default_rng(seed)
            eig = K.eig()
            draws = [sample_kron(K, rng, eig).subset
                     for _ in tqdm(range(count), desc="Sampling", unit="subset", disable=not self.settings.progress)]
            self.store.save_subsets(out, draws)
            return draws
        except Exception as e:
            logger.error(f"Error during sampling: {str(e)}")
            raise

    def cmd_eval(self, kernel: str, data: str) -> float:
        try:
            K = self.store.load_kernel(kernel)
            training = self.store.load_subsets(data, K.size)
            if training.n == 0:
                raise ValueError(f"No subsets in {data}")
            value = log_likelihood(K, training)
            print(f"{value:.12f}")
            return value
        except Exception as e:
            logger.error(f"Error during evaluation: {str(e)}")
            raise

    def cmd_bench(self, data: str, n1: int, n2: int, algos: Sequence[str], iters: int, seed: int,
                  out: str, minibatch: int = 1) -> List[Tuple[str, int, float, float]]:
        """Per-iteration update time and log-likelihood; the first iteration is a warm-up and is dropped."""
        try:
            unknown = [a for a in algos if a not in BENCH_ALGORITHMS]
            if unknown:
                raise ValueError(f"Unknown benchmark algorithms {unknown} "
                                 f"(expected some of {', '.join(BENCH_ALGORITHMS)})")
            training = self.store.load_subsets(data, n1 * n2)
            K0 = random_kron_kernel((n1, n2), np.random.default_rng(seed))

            rows = []
            for algo in tqdm(algos, desc="Benchmark", unit="algo", disable=not self.settings.progress):
                stochastic = algo == "krk-stochastic"
                cfg = self.settings.fit_config(max_iter=iters + 1, tol=0.0, seed=seed,
                                               mode="stochastic" if stochastic else "batch",
                                               minibatch_size=minibatch)
                _, history = self._fit("krk" if stochastic else algo, K0, training, cfg)
                records = history.records
                for previous, record in zip(records, records[1:]):
                    rows.append((algo, record.iteration - 1, record.seconds - previous.seconds, record.loglik))
                logger.info(f"{algo}: {len(records) - 1} timed iterations, "
                            f"total {records[-1].seconds - records[0].seconds:.3f}s")

            self.store.save_bench(out, rows)
            return rows
        except Exception as e:
            logger.error(f"Error during benchmark: {str(e)}")
            raise

    def cmd_partition(self, data: str, out: str, z: Optional[int] = None,
                      ground_size: Optional[int] = None) -> PartitionPlan:
        try:
            training = self.store.load_subsets(data, ground_size)
            plan = greedy_partition(training, z)
            self.store.save_plan(out, plan)
            print(f"groups: {plan.group_count}")
            print("union sizes: " + " ".join(str(s) for s in plan.union_sizes()))
            return plan
        except Exception as e:
            logger.error(f"Error during partitioning: {str(e)}")
            raise

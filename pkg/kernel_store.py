import csv
import json
import logging
import os
from typing import Iterable, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from dpp_model import KronKernel, TrainingSet, normalize_subset
from errors import DataFormatError, KernelStoreError
from models import FactorEntry, FitHistory, KernelManifest, PartitionPlan

logger = logging.getLogger(__name__)

TRACE_HEADER = ["iter", "seconds", "loglik"]
BENCH_HEADER = ["algo", "iter", "seconds", "loglik"]


def format_float(x: float) -> str:
    return repr(float(x))


class KernelStore:
    """Reads and writes kernels, subset files, traces and partition plans."""

    def save_kernel(self, kernel: KronKernel, manifest_path: str) -> KernelManifest:
        directory = os.path.dirname(os.path.abspath(manifest_path))
        stem = os.path.splitext(os.path.basename(manifest_path))[0]
        os.makedirs(directory, exist_ok=True)

        entries = []
        for k, factor in enumerate(kernel.factors, 1):
            filename = f"{stem}_factor{k}.csv"
            with open(os.path.join(directory, filename), 'w', encoding='utf-8', newline='') as f:
                for row in factor:
                    f.write(",".join(format_float(x) for x in row) + "\n")
            entries.append(FactorEntry(rows=factor.shape[0], path=filename))

        manifest = KernelManifest(factors=entries)
        with open(manifest_path, 'w', encoding='utf-8') as f:
            f.write(manifest.model_dump_json(indent=2) + "\n")
        logger.info(f"Saved kernel with factor sizes {kernel.dims} to {manifest_path}")
        return manifest

    def load_manifest(self, manifest_path: str) -> KernelManifest:
        try:
            with open(manifest_path, 'r', encoding='utf-8') as f:
                return KernelManifest(**json.load(f))
        except FileNotFoundError:
            raise KernelStoreError(f"Kernel manifest not found: {manifest_path}")
        except (json.JSONDecodeError, ValidationError, TypeError) as e:
            raise KernelStoreError(f"Invalid kernel manifest {manifest_path}: {str(e)}")

    def _read_factor(self, path: str, rows: int) -> np.ndarray:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                lines = [line for line in f.read().splitlines() if line.strip()]
        except FileNotFoundError:
            raise KernelStoreError(f"Factor file not found: {path}")
        if len(lines) != rows:
            raise KernelStoreError(f"Factor file {path} has {len(lines)} rows, manifest says {rows}")
        matrix = np.empty((rows, rows))
        for line_number, line in enumerate(lines, 1):
            fields = line.split(",")
            if len(fields) != rows:
                raise DataFormatError(path, line_number, f"expected {rows} values, found {len(fields)}")
            try:
                matrix[line_number - 1] = [float(x) for x in fields]
            except ValueError as e:
                raise DataFormatError(path, line_number, str(e))
        return matrix

    def load_kernel(self, manifest_path: str) -> KronKernel:
        manifest = self.load_manifest(manifest_path)
        directory = os.path.dirname(os.path.abspath(manifest_path))
        factors = [self._read_factor(os.path.join(directory, entry.path), entry.rows) for entry in manifest.factors]
        kernel = KronKernel(factors)
        logger.info(f"Loaded kernel with factor sizes {kernel.dims} from {manifest_path}")
        return kernel

    def save_subsets(self, path: str, subsets: Iterable[Sequence[int]]) -> int:
        """One subset per line. Empty subsets have no line form; their count goes in a footer."""
        written, empty_count = 0, 0
        with open(path, 'w', encoding='utf-8', newline='') as f:
            for subset in subsets:
                if len(subset) == 0:
                    empty_count += 1
                    continue
                f.write(" ".join(str(int(i)) for i in subset) + "\n")
                written += 1
            f.write(f"# empty_count={empty_count}\n")
        logger.info(f"Wrote {written} subsets to {path} ({empty_count} empty)")
        return empty_count

    def read_empty_count(self, path: str) -> int:
        count = 0
        with open(path, 'r', encoding='utf-8') as f:
            for line in f:
                stripped = line.strip()
                if stripped.startswith("# empty_count="):
                    count = int(stripped.split("=", 1)[1])
        return count

    def load_subsets(self, path: str, ground_size: Optional[int] = None) -> TrainingSet:
        """Parse a subsets file. Without ``ground_size`` the ground set is max index + 1."""
        raw: List[List[int]] = []
        try:
            with open(path, 'r', encoding='utf-8') as f:
                lines = f.read().splitlines()
        except FileNotFoundError:
            raise KernelStoreError(f"Subsets file not found: {path}")

        for line_number, line in enumerate(lines, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                indices = [int(token) for token in stripped.split()]
            except ValueError as e:
                raise DataFormatError(path, line_number, f"not an integer list ({str(e)})")
            if len(set(indices)) != len(indices):
                raise DataFormatError(path, line_number, "duplicate index in subset")
            if min(indices) < 0:
                raise DataFormatError(path, line_number, "negative index")
            if ground_size is not None and max(indices) >= ground_size:
                raise DataFormatError(path, line_number,
                                      f"index {max(indices)} out of range for ground set of size {ground_size}")
            raw.append(indices)

        if ground_size is None:
            ground_size = max((max(s) for s in raw), default=-1) + 1
        subsets = [normalize_subset(s, ground_size) for s in raw]
        logger.info(f"Loaded {len(subsets)} subsets from {path}")
        return TrainingSet(ground_size, subsets)

    def save_trace(self, path: str, history: FitHistory):
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            rows = history.trace_rows()
            for iteration, seconds, loglik in rows:
                writer.writerow([iteration, format_float(seconds), format_float(loglik)])
        logger.info(f"Wrote trace with {len(rows)} rows to {path}")

    def load_trace(self, path: str) -> List[dict]:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != TRACE_HEADER:
                raise DataFormatError(path, 1, f"expected header {','.join(TRACE_HEADER)}")
            return [{"iter": int(r["iter"]), "seconds": float(r["seconds"]), "loglik": float(r["loglik"])}
                    for r in reader]

    def save_bench(self, path: str, rows: Iterable[Sequence]):
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(BENCH_HEADER)
            for algo, iteration, seconds, loglik in rows:
                writer.writerow([algo, iteration, format_float(seconds), format_float(loglik)])
        logger.info(f"Wrote benchmark results to {path}")

    def save_plan(self, path: str, plan: PartitionPlan):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(plan.model_dump_json(indent=2) + "\n")
        logger.info(f"Wrote partition plan with {plan.group_count} groups to {path}")

    def load_plan(self, path: str) -> PartitionPlan:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return PartitionPlan(**json.load(f))
        except FileNotFoundError:
            raise KernelStoreError(f"Partition plan not found: {path}")
        except (json.JSONDecodeError, ValidationError) as e:
            raise KernelStoreError(f"Invalid partition plan {path}: {str(e)}")

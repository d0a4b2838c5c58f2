from typing import Optional, Sequence


class KronDppError(Exception):
    pass


class DimensionError(KronDppError, ValueError):
    pass


class IndexRangeError(KronDppError, ValueError):
    pass


class NotSymmetricError(KronDppError, ValueError):
    pass


class NotPositiveDefiniteError(KronDppError, ValueError):
    def __init__(self, min_eigenvalue: float, floor: float = 0.0,
                 iteration: Optional[int] = None, factor: Optional[str] = None):
        self.min_eigenvalue = float(min_eigenvalue)
        self.floor = floor
        self.iteration = iteration
        self.factor = factor
        super().__init__(str(self))

    def __str__(self):
        where = ""
        if self.iteration is not None:
            where += f" at iteration {self.iteration}"
        if self.factor is not None:
            where += f" in factor {self.factor}"
        return (f"Matrix is not positive definite{where}: "
                f"min eigenvalue {self.min_eigenvalue:.6g} <= floor {self.floor:.3g}")

    def located(self, iteration: int, factor: str) -> "NotPositiveDefiniteError":
        return NotPositiveDefiniteError(self.min_eigenvalue, self.floor, iteration, factor)


class SingularSubmatrixError(KronDppError, ValueError):
    def __init__(self, subset: Sequence[int]):
        self.subset = list(subset)
        preview = self.subset[:10]
        more = "..." if len(self.subset) > 10 else ""
        super().__init__(f"Kernel submatrix for subset {preview}{more} is singular even after jitter")


class ConvergenceError(KronDppError, ValueError):
    pass


class InfeasiblePartitionError(KronDppError, ValueError):
    def __init__(self, subset_index: int, subset: Sequence[int], z: int):
        self.subset_index = subset_index
        self.subset = list(subset)
        self.z = z
        super().__init__(f"Subset #{subset_index} has {len(self.subset)} items, "
                         f"which does not fit under the union bound z={z}")


class EnumerationLimitError(KronDppError, ValueError):
    pass


class DataFormatError(KronDppError, ValueError):
    def __init__(self, path: str, line_number: int, message: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class KernelStoreError(KronDppError, OSError):
    pass


NUMERICAL_ERRORS = (NotPositiveDefiniteError, SingularSubmatrixError, ConvergenceError)

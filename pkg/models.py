from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class FitConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    step_size: float = Field(1.0, gt=0)
    max_iter: int = Field(100, ge=0)
    mode: Literal["batch", "stochastic"] = "batch"
    minibatch_size: int = Field(1, ge=1)
    tol: float = Field(1e-4, ge=0)  # relative log-likelihood change
    seed: int = 0
    pd_floor: float = Field(1e-10, gt=0)
    max_halvings: int = Field(20, ge=0)
    power_tol: float = Field(1e-10, gt=0)
    power_max_iter: int = Field(1000, ge=1)
    progress: bool = False


class HistoryRecord(BaseModel):
    iteration: int
    seconds: float
    loglik: float
    min_eig: float


class FitHistory(BaseModel):
    """One record per completed iteration; the starting point is kept apart."""

    initial_loglik: Optional[float] = None
    initial_min_eig: Optional[float] = None
    records: List[HistoryRecord] = Field(default_factory=list)

    def append(self, iteration: int, seconds: float, loglik: float, min_eig: float):
        self.records.append(HistoryRecord(iteration=iteration, seconds=seconds, loglik=loglik, min_eig=min_eig))

    def logliks(self) -> List[float]:
        return [r.loglik for r in self.records]

    def trajectory(self) -> List[float]:
        start = [] if self.initial_loglik is None else [self.initial_loglik]
        return start + self.logliks()

    def final_loglik(self) -> Optional[float]:
        return self.records[-1].loglik if self.records else self.initial_loglik

    def trace_rows(self) -> List[Tuple[int, float, float]]:
        rows = [] if self.initial_loglik is None else [(0, 0.0, self.initial_loglik)]
        return rows + [(r.iteration, r.seconds, r.loglik) for r in self.records]

    def __len__(self):
        return len(self.records)


class FactorEntry(BaseModel):
    rows: int = Field(ge=1)
    path: str


class KernelManifest(BaseModel):
    model_config = ConfigDict(extra='forbid')

    version: Literal[1] = 1
    factors: List[FactorEntry] = Field(min_length=1)

    def ground_size(self) -> int:
        size = 1
        for f in self.factors:
            size *= f.rows
        return size


class PartitionPlan(BaseModel):
    """Groups of training-subset positions whose item unions stay strictly below z."""

    z: int = Field(ge=1)
    groups: List[List[int]] = Field(default_factory=list)
    unions: List[List[int]] = Field(default_factory=list)

    @model_validator(mode='after')
    def check_bound(self):
        if len(self.groups) != len(self.unions):
            raise ValueError("Every group needs exactly one union entry")
        for k, union in enumerate(self.unions):
            if len(union) >= self.z:
                raise ValueError(f"Group {k} has union size {len(union)}, not below z={self.z}")
        return self

    @property
    def group_count(self) -> int:
        return len(self.groups)

    def union_sizes(self) -> List[int]:
        return [len(u) for u in self.unions]


class SampleReport(BaseModel):
    subset: List[int]
    selected: List[int]
    timings: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode='after')
    def check_sizes(self):
        if len(self.subset) != len(self.selected):
            raise ValueError(f"Sampled {len(self.subset)} items from {len(self.selected)} eigenvectors")
        return self

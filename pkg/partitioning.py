"""Greedy grouping of training subsets so each group's item union stays below z.

Finding the fewest groups is a subset-union knapsack problem, which is NP-hard; the
first-fit heuristic below is deterministic and usually close.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from dpp_model import KronKernel, TrainingSet
from errors import InfeasiblePartitionError
from models import PartitionPlan
from theta import ThetaAccumulator, accumulate_sparse

logger = logging.getLogger(__name__)


def default_z(T: TrainingSet) -> int:
    return max(2 * T.kappa, 2)


def greedy_partition(T: TrainingSet, z: Optional[int] = None) -> PartitionPlan:
    """First-fit over subsets taken in descending size (ties by original position)."""
    z = default_z(T) if z is None else int(z)
    order = sorted(range(T.n), key=lambda p: (-len(T.subsets[p]), p))

    groups: List[List[int]] = []
    unions: List[set] = []
    for position in order:
        subset = T.subsets[position]
        if len(subset) >= z:
            raise InfeasiblePartitionError(position, subset.tolist(), z)
        items = set(int(i) for i in subset)
        for members, union in zip(groups, unions):
            if len(union | items) < z:
                members.append(position)
                union |= items
                break
        else:
            groups.append([position])
            unions.append(items)

    logger.info(f"Partitioned {T.n} subsets into {len(groups)} groups with union bound z={z}")
    return PartitionPlan(z=z, groups=groups, unions=[sorted(u) for u in unions])


def validate_plan(plan: PartitionPlan, T: TrainingSet):
    """Check that ``plan`` covers T exactly once and that its unions match the data."""
    seen = sorted(p for group in plan.groups for p in group)
    if seen != list(range(T.n)):
        raise ValueError("Partition groups must be disjoint and cover every training subset")
    for k, (group, union) in enumerate(zip(plan.groups, plan.unions)):
        actual = set()
        for p in group:
            actual.update(int(i) for i in T.subsets[p])
        if sorted(actual) != list(union):
            raise ValueError(f"Group {k} union does not match its subsets")
        if len(actual) >= plan.z:
            raise ValueError(f"Group {k} union size {len(actual)} is not below z={plan.z}")


def theta_grouped(K: KronKernel, T: TrainingSet, plan: PartitionPlan) -> List[ThetaAccumulator]:
    """Unnormalised per-group sums Θ_k, each stored sparsely on its group's union."""
    validate_plan(plan, T)
    return [accumulate_sparse(K, [T.subsets[p] for p in group]) for group in plan.groups]


def reassemble_theta(parts: Sequence[ThetaAccumulator], n: int) -> np.ndarray:
    return sum(part.densify() for part in parts) / n


def storage_entries(parts: Sequence[ThetaAccumulator]) -> int:
    return sum(part.entry_count() for part in parts)

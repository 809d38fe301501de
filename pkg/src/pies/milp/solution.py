from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"

STATUSES = (OPTIMAL, FEASIBLE, INFEASIBLE, UNBOUNDED, LIMIT)


@dataclass(frozen=True)
class SolveOptions:
    """Knobs for :func:`pies.milp.solve`.

    ``backend`` selects the in-repo branch-and-bound (``"bnb"``) or the
    HiGHS solver shipped with scipy (``"highs"``).
    """

    rel_gap: float = 1e-6
    abs_gap: float = 1e-4
    time_limit: float = 120.0
    node_limit: int = 1_000_000
    branching: str = "most_fractional"
    deterministic: bool = True
    backend: str = "bnb"

    def __post_init__(self):
        if self.rel_gap < 0 or self.abs_gap < 0:
            raise ValueError("gaps must be nonnegative")
        if self.time_limit <= 0 or self.node_limit <= 0:
            raise ValueError("limits must be positive")
        if self.branching not in ("most_fractional", "pseudo_cost"):
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.backend not in ("bnb", "highs"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass
class Solution:
    status: str
    objective: float = float("nan")
    values: Optional[np.ndarray] = None
    bound: float = float("-inf")
    nodes: int = 0
    wall_time: float = 0.0
    iterations: int = 0
    duals: Optional[np.ndarray] = field(default=None, repr=False)
    reduced_costs: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE)

    @property
    def gap(self) -> float:
        if not self.ok:
            return float("inf")
        return (self.objective - self.bound) / max(1.0, abs(self.objective))

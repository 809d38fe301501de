"""Solver-agnostic MILP container."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy import sparse

CONTINUOUS = "continuous"
BINARY = "binary"

LE, EQ, GE = "<=", "==", ">="
_SENSES = (LE, EQ, GE)


class ProblemError(ValueError):
    """Raised when a problem violates its structural invariants."""


@dataclass
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf
    integrality: str = CONTINUOUS

    @property
    def is_binary(self) -> bool:
        return self.integrality == BINARY


@dataclass
class Constraint:
    name: str
    coeffs: Dict[int, float]
    sense: str
    rhs: float


@dataclass
class MilpProblem:
    """Minimisation problem ``min c.x + c0`` over sparse linear rows.

    Variables and rows are addressed by integer index; names are kept for
    export and for readable diagnostics.
    """

    name: str = "problem"
    variables: List[Variable] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Dict[int, float] = field(default_factory=dict)
    constant: float = 0.0
    layout: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self._index = {v.name: i for i, v in enumerate(self.variables)}

    # -- construction -------------------------------------------------

    def add_var(self, name: str, lower: float = 0.0, upper: float = math.inf,
                binary: bool = False, cost: float = 0.0) -> int:
        if name in self._index:
            raise ProblemError(f"duplicate variable name {name!r}")
        if binary:
            lower, upper = max(lower, 0.0), min(upper, 1.0)
        if lower > upper:
            raise ProblemError(f"variable {name!r}: lower {lower} > upper {upper}")
        idx = len(self.variables)
        self.variables.append(Variable(name, float(lower), float(upper),
                                       BINARY if binary else CONTINUOUS))
        self._index[name] = idx
        if cost:
            self.add_cost(idx, cost)
        return idx

    def add_vars(self, prefix: str, n: int, lower: float = 0.0,
                 upper: float | Iterable[float] = math.inf, binary: bool = False) -> List[int]:
        uppers = [upper] * n if np.isscalar(upper) else list(upper)
        return [self.add_var(f"{prefix}[{t}]", lower, uppers[t], binary) for t in range(n)]

    def add_constraint(self, coeffs: Dict[int, float] | Iterable[Tuple[int, float]],
                       sense: str, rhs: float, name: Optional[str] = None) -> int:
        if sense not in _SENSES:
            raise ProblemError(f"unknown relation {sense!r}")
        merged: Dict[int, float] = {}
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        for j, a in items:
            if not 0 <= j < len(self.variables):
                raise ProblemError(f"constraint {name!r} references unknown variable {j}")
            merged[j] = merged.get(j, 0.0) + float(a)
        merged = {j: a for j, a in merged.items() if a != 0.0}
        idx = len(self.constraints)
        self.constraints.append(Constraint(name or f"c{idx}", merged, sense, float(rhs)))
        return idx

    def add_cost(self, j: int, c: float) -> None:
        self.objective[j] = self.objective.get(j, 0.0) + float(c)

    def index(self, name: str) -> int:
        return self._index[name]

    # -- views ------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def binary_indices(self) -> List[int]:
        return [j for j, v in enumerate(self.variables) if v.is_binary]

    @property
    def n_binaries(self) -> int:
        return sum(v.is_binary for v in self.variables)

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lo = np.array([v.lower for v in self.variables], dtype=float)
        hi = np.array([v.upper for v in self.variables], dtype=float)
        return lo, hi

    def matrix(self) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            for j, a in con.coeffs.items():
                rows.append(i)
                cols.append(j)
                vals.append(a)
        return sparse.csr_matrix((vals, (rows, cols)),
                                 shape=(self.n_constraints, self.n_vars))

    def row_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Rows as ``lo <= A x <= hi``."""
        lo = np.full(self.n_constraints, -math.inf)
        hi = np.full(self.n_constraints, math.inf)
        for i, con in enumerate(self.constraints):
            if con.sense in (GE, EQ):
                lo[i] = con.rhs
            if con.sense in (LE, EQ):
                hi[i] = con.rhs
        return lo, hi

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.cost_vector() @ x + self.constant)

    def max_violation(self, x) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.bounds()
        worst = float(max(np.max(lo - x, initial=0.0), np.max(x - hi, initial=0.0)))
        if self.constraints:
            ax = self.matrix() @ x
            rlo, rhi = self.row_bounds()
            worst = max(worst, float(np.max(rlo - ax, initial=0.0)),
                        float(np.max(ax - rhi, initial=0.0)))
        return worst

    def validate(self) -> None:
        for v in self.variables:
            if v.lower > v.upper:
                raise ProblemError(f"variable {v.name!r}: lower > upper")
            if v.is_binary and (v.lower < 0 or v.upper > 1):
                raise ProblemError(f"binary {v.name!r} has bounds outside [0, 1]")
        for con in self.constraints:
            for j in con.coeffs:
                if not 0 <= j < self.n_vars:
                    raise ProblemError(f"constraint {con.name!r} references unknown variable {j}")

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "MilpProblem":
        """Copy sharing rows and objective but with replaced variable bounds."""
        variables = [Variable(v.name, float(l), float(u), v.integrality)
                     for v, l, u in zip(self.variables, lower, upper)]
        return MilpProblem(self.name, variables, self.constraints, self.objective, self.constant)

    def relaxed(self) -> "MilpProblem":
        variables = [Variable(v.name, v.lower, v.upper, CONTINUOUS) for v in self.variables]
        return MilpProblem(self.name, variables, self.constraints, self.objective, self.constant)


@dataclass
class LinExpr:
    """Sparse affine expression ``sum(coeffs[j] * x[j]) + constant``."""

    coeffs: Dict[int, float] = field(default_factory=dict)
    constant: float = 0.0

    def add(self, j: int, a: float) -> "LinExpr":
        if a:
            self.coeffs[j] = self.coeffs.get(j, 0.0) + float(a)
        return self

    def __iadd__(self, other: "LinExpr") -> "LinExpr":
        for j, a in other.coeffs.items():
            self.add(j, a)
        self.constant += other.constant
        return self

    def scaled(self, s: float) -> "LinExpr":
        return LinExpr({j: a * s for j, a in self.coeffs.items()}, self.constant * s)

    def value(self, x) -> float:
        return float(sum(a * x[j] for j, a in self.coeffs.items()) + self.constant)

"""HiGHS backend through ``scipy.optimize.milp`` for full-size problems."""
from __future__ import annotations

import time

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .problem import MilpProblem
from .solution import (FEASIBLE, INFEASIBLE, LIMIT, OPTIMAL, UNBOUNDED,
                       Solution, SolveOptions)


def solve_highs(problem: MilpProblem, opts: SolveOptions) -> Solution:
    start = time.monotonic()
    c = problem.cost_vector()
    lo, hi = problem.bounds()
    integrality = np.array([1 if v.is_binary else 0 for v in problem.variables])
    constraints = []
    if problem.n_constraints:
        rlo, rhi = problem.row_bounds()
        constraints.append(LinearConstraint(problem.matrix(), rlo, rhi))
    res = milp(c, integrality=integrality, bounds=Bounds(lo, hi), constraints=constraints,
               options={"time_limit": opts.time_limit, "mip_rel_gap": opts.rel_gap,
                        "node_limit": opts.node_limit, "disp": False})
    elapsed = time.monotonic() - start
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2:
        return Solution(INFEASIBLE, nodes=nodes, wall_time=elapsed)
    if res.status == 3:
        return Solution(UNBOUNDED, nodes=nodes, wall_time=elapsed)
    if res.x is None:
        return Solution(LIMIT, nodes=nodes, wall_time=elapsed)
    x = np.clip(np.asarray(res.x, dtype=float), lo, hi)
    b = integrality == 1
    x[b] = np.round(x[b])
    if b.any():
        x = _polish(problem, c, lo, hi, b, x)
    obj = float(c @ x) + problem.constant
    bound = getattr(res, "mip_dual_bound", None)
    bound = obj if bound is None or not np.isfinite(bound) else float(bound) + problem.constant
    status = OPTIMAL if res.status == 0 else FEASIBLE
    return Solution(status, obj, x, min(bound, obj), nodes, elapsed)


def _polish(problem: MilpProblem, c, lo, hi, b, x) -> np.ndarray:
    """Re-solve the continuous part with binaries fixed at their rounded values.

    HiGHS accepts binaries within its integrality tolerance (about 1e-6),
    which leaves row residues of that order times the big-M coefficients.
    """
    lo, hi = lo.copy(), hi.copy()
    lo[b] = hi[b] = x[b]
    A_ub = A_eq = b_ub = b_eq = None
    if problem.n_constraints:
        A = problem.matrix()
        rlo, rhi = problem.row_bounds()
        eq = rlo == rhi
        up, dn = np.isfinite(rhi) & ~eq, np.isfinite(rlo) & ~eq
        if eq.any():
            A_eq, b_eq = A[eq], rhi[eq]
        if up.any() or dn.any():
            A_ub = sparse.vstack([A[up], -A[dn]]).tocsr()
            b_ub = np.concatenate([rhi[up], -rlo[dn]])
    bounds = np.column_stack([lo, hi])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return x
    out = np.clip(np.asarray(res.x, dtype=float), lo, hi)
    out[b] = x[b]
    return out

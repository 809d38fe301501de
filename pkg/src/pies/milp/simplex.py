"""Dense bounded-variable primal simplex.

Rows ``rlo <= A x <= rhi`` are turned into ``A x - s = 0`` with the slack
``s`` carrying the row bounds, so every column is just a bounded variable.
Phase 1 drives one artificial per row to zero; phase 2 keeps the artificials
fixed at zero. Dantzig pricing is used until a run of degenerate pivots is
seen, after which the phase finishes under Bland's rule.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .problem import MilpProblem
from .solution import INFEASIBLE, LIMIT, OPTIMAL, UNBOUNDED, Solution

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
DEGENERATE_RUN = 50
REFACTOR_EVERY = 100

_LOWER, _UPPER, _FREE, _BASIC = 0, 1, 2, 3


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0


class _Unbounded(Exception):
    pass


class _IterationLimit(Exception):
    pass


class _Tableau:
    def __init__(self, A, rlo, rhi, lo, hi):
        m, n = A.shape
        self.m, self.n = m, n
        self.N = n + m  # structurals + slacks
        M = np.hstack([A, -np.eye(m)])
        self.lb = np.concatenate([lo, rlo, np.zeros(m)])
        self.ub = np.concatenate([hi, rhi, np.full(m, np.inf)])
        total = self.N + m
        self.x = np.zeros(total)
        self.state = np.full(total, _LOWER)
        for j in range(self.N):
            if np.isfinite(self.lb[j]):
                self.x[j] = self.lb[j]
            elif np.isfinite(self.ub[j]):
                self.x[j], self.state[j] = self.ub[j], _UPPER
            else:
                self.state[j] = _FREE
        r = -(M @ self.x[:self.N])
        self.sign = np.where(r >= 0, 1.0, -1.0)
        self.full = np.hstack([M, np.diag(self.sign)])
        self.T = np.hstack([M * self.sign[:, None], np.eye(m)])
        self.basis = np.arange(self.N, total)
        self.state[self.basis] = _BASIC
        self.x[self.basis] = np.abs(r)
        self.iterations = 0
        self.bland = False

    def refactor(self):
        B = self.full[:, self.basis]
        self.T = np.linalg.solve(B, self.full)
        nb = self.state != _BASIC
        rhs = -(self.full[:, nb] @ self.x[nb])
        self.x[self.basis] = np.linalg.solve(B, rhs)

    def run(self, cost, max_iter, deadline):
        T, x, lb, ub, state = self.T, self.x, self.lb, self.ub, self.state
        d = cost - cost[self.basis] @ T
        degenerate = 0
        since_refactor = 0
        self.bland = False
        movable = (ub - lb) > FEAS_TOL
        while True:
            can_up = ((state == _LOWER) | (state == _FREE)) & movable & (d < -OPT_TOL)
            can_down = ((state == _UPPER) | (state == _FREE)) & movable & (d > OPT_TOL)
            eligible = np.flatnonzero(can_up | can_down)
            if eligible.size == 0:
                return
            if self.iterations >= max_iter or (deadline and time.monotonic() > deadline):
                raise _IterationLimit
            if self.bland:
                q = int(eligible[0])
            else:
                q = int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if can_up[q] else -1.0
            delta = -direction * T[:, q]
            xb = x[self.basis]
            lbb, ubb = lb[self.basis], ub[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = delta < -PIVOT_TOL
            inc = delta > PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios[dec] = (xb[dec] - lbb[dec]) / -delta[dec]
                ratios[inc] = (ubb[inc] - xb[inc]) / delta[inc]
            ratios = np.maximum(ratios, 0.0)
            flip = ub[q] - lb[q]
            theta_row = ratios.min() if self.m else np.inf
            if not np.isfinite(theta_row) and not np.isfinite(flip):
                raise _Unbounded
            self.iterations += 1
            if flip <= theta_row:
                theta = flip
                x[self.basis] = xb + theta * delta
                x[q] = ub[q] if direction > 0 else lb[q]
                state[q] = _UPPER if direction > 0 else _LOWER
                continue
            theta = theta_row
            ties = np.flatnonzero(ratios <= theta + 1e-12)
            if self.bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(delta[ties]))])
            if theta < 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_RUN:
                    self.bland = True
            else:
                degenerate = 0
            x[self.basis] = xb + theta * delta
            x[q] += direction * theta
            leaving = self.basis[r]
            if delta[r] < 0:
                x[leaving], state[leaving] = lb[leaving], _LOWER
            else:
                x[leaving], state[leaving] = ub[leaving], _UPPER
            piv = T[r, q]
            T[r] /= piv
            col = T[:, q].copy()
            col[r] = 0.0
            rows = np.flatnonzero(col)
            T[rows] -= np.outer(col[rows], T[r])
            T[:, q] = 0.0
            T[r, q] = 1.0
            d -= d[q] * T[r]
            d[q] = 0.0
            self.basis[r] = q
            state[q] = _BASIC
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                T = self.T
                d = cost - cost[self.basis] @ T
                since_refactor = 0


def solve_lp(c, A, rlo, rhi, lo, hi, max_iter: int = 50_000,
             time_limit: float | None = None) -> LpResult:
    """Minimise ``c.x`` subject to ``rlo <= A x <= rhi`` and ``lo <= x <= hi``."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(len(rlo), len(c))
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    rlo, rhi = np.asarray(rlo, dtype=float), np.asarray(rhi, dtype=float)
    if np.any(lo > hi + FEAS_TOL) or np.any(rlo > rhi + FEAS_TOL):
        return LpResult(INFEASIBLE)
    n = len(c)
    m = A.shape[0]
    tab = _Tableau(A, rlo, rhi, lo, hi)
    deadline = time.monotonic() + time_limit if time_limit else None
    phase1 = np.concatenate([np.zeros(tab.N), np.ones(m)])
    try:
        tab.run(phase1, max_iter, deadline)
        if m:
            tab.refactor()
        infeas = float(np.sum(tab.x[tab.N:]))
        scale = max(1.0, float(np.max(np.abs(tab.x[:tab.N]), initial=0.0)))
        if infeas > 1e-7 * scale:
            return LpResult(INFEASIBLE, iterations=tab.iterations)
        tab.ub[tab.N:] = 0.0
        tab.x[tab.N:] = np.where(tab.state[tab.N:] == _BASIC, tab.x[tab.N:], 0.0)
        tab.state[tab.N:] = np.where(tab.state[tab.N:] == _BASIC, _BASIC, _LOWER)
        phase2 = np.concatenate([c, np.zeros(2 * m)])
        tab.run(phase2, max_iter, deadline)
        if m:
            tab.refactor()
    except _Unbounded:
        return LpResult(UNBOUNDED, iterations=tab.iterations)
    except _IterationLimit:
        return LpResult(LIMIT, iterations=tab.iterations)
    except np.linalg.LinAlgError:
        return LpResult(LIMIT, iterations=tab.iterations)

    x = tab.x[:n].copy()
    x = np.clip(x, lo, hi)
    cost_all = np.concatenate([c, np.zeros(2 * m)])
    if m:
        y = (cost_all[tab.basis] @ tab.T[:, tab.N:]) * tab.sign
    else:
        y = np.zeros(0)
    reduced = c - A.T @ y
    return LpResult(OPTIMAL, x, float(c @ x), y, reduced, tab.iterations)


def dual_objective(c, A, rlo, rhi, lo, hi, y) -> float:
    """Lagrangian lower bound ``min_box (c - A'y).x + y.s`` for row duals ``y``.

    Valid for any ``y``; equals the primal optimum at an optimal dual.
    """
    c = np.asarray(c, dtype=float)
    d = c - np.asarray(A, dtype=float).T @ y
    total = 0.0
    for coef, l, u in zip(np.concatenate([d, y]), np.concatenate([lo, rlo]),
                          np.concatenate([hi, rhi])):
        if abs(coef) <= 1e-12:
            continue
        bound = l if coef > 0 else u
        if not np.isfinite(bound):
            return -math.inf
        total += coef * bound
    return total


def simplex_lp(problem: MilpProblem, time_limit: float | None = None) -> Solution:
    """Solve the LP relaxation of ``problem`` with the in-repo simplex."""
    start = time.monotonic()
    lo, hi = problem.bounds()
    rlo, rhi = problem.row_bounds()
    A = problem.matrix().toarray()
    res = solve_lp(problem.cost_vector(), A, rlo, rhi, lo, hi, time_limit=time_limit)
    elapsed = time.monotonic() - start
    if res.status != OPTIMAL:
        return Solution(res.status, iterations=res.iterations, wall_time=elapsed)
    obj = res.objective + problem.constant
    return Solution(OPTIMAL, obj, res.x, obj, 0, elapsed, res.iterations,
                    res.duals, res.reduced_costs)

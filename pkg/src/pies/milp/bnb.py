"""Branch-and-bound over the in-repo simplex, plus an enumeration oracle."""
from __future__ import annotations

import heapq
import itertools
import math
import time

import numpy as np

from .problem import MilpProblem, ProblemError
from .simplex import solve_lp
from .solution import (FEASIBLE, INFEASIBLE, LIMIT, OPTIMAL, UNBOUNDED,
                       Solution, SolveOptions)

INT_TOL = 1e-6
BRUTE_FORCE_MAX_BINARIES = 20


class _Arrays:
    def __init__(self, problem: MilpProblem):
        self.c = problem.cost_vector()
        self.A = problem.matrix().toarray()
        self.rlo, self.rhi = problem.row_bounds()
        self.lo, self.hi = problem.bounds()
        self.binaries = np.array(problem.binary_indices, dtype=int)
        self.constant = problem.constant

    def lp(self, lo, hi, time_limit=None):
        return solve_lp(self.c, self.A, self.rlo, self.rhi, lo, hi, time_limit=time_limit)


def _gap_closed(incumbent: float, bound: float, opts: SolveOptions) -> bool:
    if not math.isfinite(incumbent):
        return False
    diff = incumbent - bound
    return diff <= opts.abs_gap and diff <= opts.rel_gap * max(1.0, abs(incumbent))


class _PseudoCosts:
    def __init__(self, n):
        self.sums = np.zeros((2, n))
        self.counts = np.zeros((2, n))

    def update(self, j, branch_up, gain, frac):
        side = int(branch_up)
        dist = (1.0 - frac) if branch_up else frac
        if dist > INT_TOL and math.isfinite(gain):
            self.sums[side, j] += max(gain, 0.0) / dist
            self.counts[side, j] += 1

    def pick(self, candidates, fracs):
        scores = []
        known = self.counts.sum(axis=0)
        mean = [self.sums[s].sum() / max(self.counts[s].sum(), 1.0) or 1.0 for s in (0, 1)]
        for j, f in zip(candidates, fracs):
            down = self.sums[0, j] / self.counts[0, j] if self.counts[0, j] else mean[0]
            up = self.sums[1, j] / self.counts[1, j] if self.counts[1, j] else mean[1]
            scores.append(max(down * f, 1e-9) * max(up * (1 - f), 1e-9))
        if not known[candidates].any():
            return None
        return int(candidates[int(np.argmax(scores))])


def solve(problem: MilpProblem, opts: SolveOptions | None = None) -> Solution:
    """Solve ``problem`` to the gap contract in ``opts``."""
    opts = opts or SolveOptions()
    problem.validate()
    if opts.backend == "highs":
        from .highs import solve_highs
        return solve_highs(problem, opts)
    return _branch_and_bound(problem, opts)


def _branch_and_bound(problem: MilpProblem, opts: SolveOptions) -> Solution:
    start = time.monotonic()
    deadline = start + opts.time_limit
    arr = _Arrays(problem)
    bins = arr.binaries
    pseudo = _PseudoCosts(problem.n_vars)
    incumbent, best_x = math.inf, None
    nodes = 0
    iterations = 0
    counter = itertools.count()
    heap: list = []
    hit_limit = False

    def finish(status, bound):
        elapsed = time.monotonic() - start
        if best_x is None:
            return Solution(status, nodes=nodes, wall_time=elapsed, iterations=iterations)
        obj = incumbent + arr.constant
        return Solution(status, obj, best_x, min(bound + arr.constant, obj), nodes, elapsed, iterations)

    def polish(lo, hi, x):
        # Refix binaries at their rounded values and clean the continuous part.
        flo, fhi = lo.copy(), hi.copy()
        rounded = np.round(x[bins])
        flo[bins] = fhi[bins] = rounded
        res = arr.lp(flo, fhi)
        return res if res.status == OPTIMAL else None

    root = arr.lp(arr.lo, arr.hi, time_limit=opts.time_limit)
    nodes = 1
    iterations += root.iterations
    if root.status in (INFEASIBLE, UNBOUNDED):
        return finish(root.status, -math.inf)
    if root.status != OPTIMAL:
        return finish(LIMIT, -math.inf)
    heapq.heappush(heap, (root.objective, next(counter), arr.lo.copy(), arr.hi.copy(), root, None))
    closed_bound = math.inf

    while heap:
        bound, _, lo, hi, res, parent = heapq.heappop(heap)
        if _gap_closed(incumbent, bound, opts) or bound >= incumbent:
            closed_bound = bound
            heap.clear()
            break
        # Plunge from this node until it is pruned or integral.
        while True:
            if res is None:
                if nodes >= opts.node_limit or time.monotonic() > deadline:
                    hit_limit = True
                    heapq.heappush(heap, (bound, next(counter), lo, hi, None, parent))
                    break
                res = arr.lp(lo, hi, time_limit=max(deadline - time.monotonic(), 1e-3))
                nodes += 1
                iterations += res.iterations
                if res.status == LIMIT:
                    hit_limit = True
                    heapq.heappush(heap, (bound, next(counter), lo, hi, None, parent))
                    break
                if parent is not None and res.status == OPTIMAL:
                    j, up, frac, parent_obj = parent
                    pseudo.update(j, up, res.objective - parent_obj, frac)
            if res.status != OPTIMAL:
                break
            node_bound = res.objective
            if math.isfinite(incumbent) and (node_bound >= incumbent or
                                             _gap_closed(incumbent, node_bound, opts)):
                break
            xb = res.x[bins]
            frac = np.abs(xb - np.round(xb))
            fractional = np.flatnonzero(frac > INT_TOL)
            if fractional.size == 0:
                clean = polish(lo, hi, res.x)
                if clean is not None and clean.objective < incumbent:
                    incumbent, best_x = clean.objective, clean.x
                break
            j = None
            if opts.branching == "pseudo_cost":
                j = pseudo.pick(bins[fractional], xb[fractional] - np.floor(xb[fractional]))
            if j is None:
                j = int(bins[fractional[np.argmax(frac[fractional])]])
            v = res.x[j]
            f = v - math.floor(v)
            down_lo, down_hi = lo.copy(), hi.copy()
            down_hi[j] = math.floor(v)
            up_lo, up_hi = lo.copy(), hi.copy()
            up_lo[j] = math.ceil(v)
            if f >= 0.5:
                dive, other = (up_lo, up_hi, (j, True, f, node_bound)), (down_lo, down_hi, (j, False, f, node_bound))
            else:
                dive, other = (down_lo, down_hi, (j, False, f, node_bound)), (up_lo, up_hi, (j, True, f, node_bound))
            heapq.heappush(heap, (node_bound, next(counter), other[0], other[1], None, other[2]))
            lo, hi, parent = dive
            bound = node_bound
            res = None
        if hit_limit:
            break

    if hit_limit:
        remaining = min((h[0] for h in heap), default=incumbent)
        return finish(FEASIBLE if best_x is not None else LIMIT, min(remaining, incumbent))
    if best_x is None:
        return finish(INFEASIBLE, math.inf)
    return finish(OPTIMAL, min(closed_bound, incumbent))


def brute_force(problem: MilpProblem, max_binaries: int = BRUTE_FORCE_MAX_BINARIES) -> Solution:
    """Enumerate every binary assignment and solve the continuous rest exactly."""
    start = time.monotonic()
    arr = _Arrays(problem)
    bins = arr.binaries
    free = arr.lo[bins] < arr.hi[bins]
    k = int(free.sum())
    if k > max_binaries:
        raise ProblemError(f"brute force limited to {max_binaries} free binaries, problem has {k}")
    cont = np.setdiff1d(np.arange(problem.n_vars), bins)
    A_b, A_c = arr.A[:, bins], arr.A[:, cont]
    has_cont = np.any(A_c != 0, axis=1)

    # binaries pinned by their bounds stay at that value in every assignment
    assignments = np.tile(np.round(arr.lo[bins]), (2 ** k, 1))
    if k:
        assignments[:, free] = np.array(list(itertools.product((0.0, 1.0), repeat=k)))
    in_bounds = np.all((assignments >= arr.lo[bins] - INT_TOL) & (assignments <= arr.hi[bins] + INT_TOL), axis=1)
    pure = ~has_cont
    if pure.any():
        act = assignments @ A_b[pure].T
        ok = np.all((act >= arr.rlo[pure] - 1e-9) & (act <= arr.rhi[pure] + 1e-9), axis=1)
        in_bounds &= ok
    # rows touching one continuous variable become bounds on it
    rows = np.flatnonzero(has_cont)
    nnz = np.count_nonzero(A_c[rows], axis=1)
    single, multi = rows[nnz == 1], rows[nnz > 1]
    s_col = np.argmax(A_c[single] != 0, axis=1) if single.size else np.zeros(0, dtype=int)
    s_coef = A_c[single, s_col]
    A_red = A_c[multi]
    c_cont = arr.c[cont]
    best, best_x = math.inf, None
    lps = 0
    for v in assignments[in_bounds]:
        shift = A_b @ v
        lo, hi = arr.lo[cont].copy(), arr.hi[cont].copy()
        if single.size:
            a = (arr.rlo[single] - shift[single]) / s_coef
            b = (arr.rhi[single] - shift[single]) / s_coef
            np.maximum.at(lo, s_col, np.where(s_coef > 0, a, b))
            np.minimum.at(hi, s_col, np.where(s_coef > 0, b, a))
            if np.any(lo > hi + 1e-9):
                continue
            hi = np.maximum(hi, lo)
        res = solve_lp(c_cont, A_red, arr.rlo[multi] - shift[multi], arr.rhi[multi] - shift[multi], lo, hi)
        lps += 1
        if res.status == UNBOUNDED:
            return Solution(UNBOUNDED, nodes=lps, wall_time=time.monotonic() - start)
        if res.status != OPTIMAL:
            continue
        obj = res.objective + arr.c[bins] @ v
        if obj < best - 1e-12:
            best = obj
            best_x = np.zeros(problem.n_vars)
            best_x[bins] = v
            best_x[cont] = res.x
    elapsed = time.monotonic() - start
    if best_x is None:
        return Solution(INFEASIBLE, nodes=lps, wall_time=elapsed)
    obj = best + arr.constant
    return Solution(OPTIMAL, obj, best_x, obj, lps, elapsed)

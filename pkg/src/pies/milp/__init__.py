from .bnb import brute_force, solve
from .mps import export_mps, read_mps
from .problem import (BINARY, CONTINUOUS, EQ, GE, LE, Constraint, LinExpr, MilpProblem,
                      ProblemError, Variable)
from .simplex import dual_objective, simplex_lp, solve_lp
from .solution import (FEASIBLE, INFEASIBLE, LIMIT, OPTIMAL, UNBOUNDED,
                       Solution, SolveOptions)

__all__ = [
    "BINARY", "CONTINUOUS", "EQ", "GE", "LE", "Constraint", "LinExpr", "MilpProblem",
    "ProblemError", "Variable", "brute_force", "solve", "export_mps", "read_mps",
    "dual_objective", "simplex_lp", "solve_lp", "FEASIBLE", "INFEASIBLE", "LIMIT",
    "OPTIMAL", "UNBOUNDED", "Solution", "SolveOptions",
]

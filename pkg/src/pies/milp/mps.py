"""Fixed-format MPS writer and a matching reader.

Names are replaced by 8-character codes (``C0000001``, ``R0000001``) so that
every name field fits the fixed columns. Numbers are written in shortest
round-trip form; when one is longer than its 12-character field the line
stays whitespace-separable, which is how mainstream readers tokenise it.
"""
from __future__ import annotations

import math
import os
from typing import List, TextIO

from .problem import EQ, GE, LE, Constraint, MilpProblem, ProblemError, Variable

_ROW_TYPE = {LE: "L", EQ: "E", GE: "G"}
_SENSE = {v: k for k, v in _ROW_TYPE.items()}
OBJ = "OBJ"


def _col(j: int) -> str:
    return f"C{j + 1:07d}"


def _row(i: int) -> str:
    return f"R{i + 1:07d}"


def _num(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _line(f1: str = "", f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    # Field starts (1-based): 2, 5, 15, 25, 40, 50.
    s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        s += f"   {f5:<8}  {f6:>12}"
    return s.rstrip()


def _bound_lines(j: int, v: Variable) -> List[str]:
    name = _col(j)
    lo, hi = v.lower, v.upper
    if v.is_binary and lo == 0.0 and hi == 1.0:
        return [_line("BV", "BND", name)]
    if lo == hi:
        return [_line("FX", "BND", name, _num(lo))]
    if lo == -math.inf and hi == math.inf:
        return [_line("FR", "BND", name)]
    out = []
    if lo == -math.inf:
        out.append(_line("MI", "BND", name))
    elif lo != 0.0 or (hi != math.inf and hi < 0):
        out.append(_line("LO", "BND", name, _num(lo)))
    if hi != math.inf:
        out.append(_line("UP", "BND", name, _num(hi)))
    return out


def write_mps(problem: MilpProblem, fh: TextIO) -> None:
    problem.validate()
    lines = [f"NAME          {problem.name[:8].upper() or 'PROBLEM'}",
             "ROWS",
             _line("N", OBJ)]
    for i, con in enumerate(problem.constraints):
        lines.append(_line(_ROW_TYPE[con.sense], _row(i)))
    lines.append("COLUMNS")
    by_col: List[List[tuple]] = [[] for _ in range(problem.n_vars)]
    for i, con in enumerate(problem.constraints):
        for j, a in con.coeffs.items():
            by_col[j].append((_row(i), a))
    in_int = False
    marker = 0
    for j, v in enumerate(problem.variables):
        if v.is_binary != in_int:
            tag = "'INTORG'" if v.is_binary else "'INTEND'"
            lines.append(_line("", f"MARK{marker:04d}", "'MARKER'", "", tag))
            marker += 1
            in_int = v.is_binary
        entries = []
        if j in problem.objective or not by_col[j]:
            entries.append((OBJ, problem.objective.get(j, 0.0)))
        entries.extend(by_col[j])
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            if len(pair) == 2:
                lines.append(_line("", _col(j), pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])))
            else:
                lines.append(_line("", _col(j), pair[0][0], _num(pair[0][1])))
    if in_int:
        lines.append(_line("", f"MARK{marker:04d}", "'MARKER'", "", "'INTEND'"))
    lines.append("RHS")
    rhs = [(OBJ, -problem.constant)] if problem.constant else []
    rhs += [(_row(i), con.rhs) for i, con in enumerate(problem.constraints) if con.rhs != 0.0]
    for name, val in rhs:
        lines.append(_line("", "RHS", name, _num(val)))
    lines.append("RANGES")
    lines.append("BOUNDS")
    for j, v in enumerate(problem.variables):
        lines.extend(_bound_lines(j, v))
    lines.append("ENDATA")
    fh.write("\n".join(lines) + "\n")


def export_mps(problem: MilpProblem, destination) -> str:
    """Write ``problem`` to ``destination`` (path or text stream)."""
    if hasattr(destination, "write"):
        write_mps(problem, destination)
        return getattr(destination, "name", "<stream>")
    path = os.fspath(destination)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            write_mps(problem, fh)
    except OSError as exc:
        raise OSError(f"cannot write MPS file {path!r}: {exc}") from exc
    return path


def read_mps(source) -> MilpProblem:
    """Parse a fixed or free MPS file (minimisation, as written by :func:`export_mps`)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(os.fspath(source), encoding="utf-8") as fh:
            text = fh.read()
    name = "problem"
    section = None
    obj_row = None
    rows: dict = {}
    row_order: List[str] = []
    cols: dict = {}
    col_order: List[str] = []
    coeffs: dict = {}
    objective: dict = {}
    rhs: dict = {}
    ranges: dict = {}
    constant = 0.0
    integer = False
    binaries = set()
    bounds: dict = {}

    def column(cname):
        if cname not in cols:
            cols[cname] = len(col_order)
            col_order.append(cname)
            if integer:
                binaries.add(cname)
        return cols[cname]

    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            parts = raw.split()
            section = parts[0].upper()
            if section == "NAME" and len(parts) > 1:
                name = parts[1]
            continue
        tok = raw.split()
        if section == "ROWS":
            kind, rname = tok[0].upper(), tok[1]
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            rows[rname] = _SENSE[kind]
            row_order.append(rname)
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                integer = tok[2] == "'INTORG'"
                continue
            j = column(tok[0])
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname == obj_row:
                    objective[j] = objective.get(j, 0.0) + float(val)
                else:
                    coeffs.setdefault(rname, {})[j] = float(val)
        elif section == "RHS":
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                if rname == obj_row:
                    constant = -float(val)
                else:
                    rhs[rname] = float(val)
        elif section == "RANGES":
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                ranges[rname] = float(val)
        elif section == "BOUNDS":
            kind, cname = tok[0].upper(), tok[2]
            val = float(tok[3]) if len(tok) > 3 else None
            j = column(cname)
            lo, hi = bounds.get(j, (0.0, math.inf))
            if kind == "UP":
                hi = val
                if val < 0 and lo == 0.0:
                    lo = -math.inf
            elif kind == "LO":
                lo = val
            elif kind == "FX":
                lo = hi = val
            elif kind == "FR":
                lo, hi = -math.inf, math.inf
            elif kind == "MI":
                lo = -math.inf
            elif kind == "PL":
                hi = math.inf
            elif kind == "BV":
                lo, hi = 0.0, 1.0
                binaries.add(cname)
            else:
                raise ProblemError(f"unsupported bound type {kind!r}")
            bounds[j] = (lo, hi)
    if ranges:
        raise ProblemError("ranged rows are not supported by MilpProblem")

    variables = []
    for j, cname in enumerate(col_order):
        lo, hi = bounds.get(j, (0.0, math.inf))
        is_bin = cname in binaries
        if is_bin and j not in bounds:
            hi = 1.0
        variables.append(Variable(cname, lo, hi, "binary" if is_bin else "continuous"))
    constraints = [Constraint(r, coeffs.get(r, {}), rows[r], rhs.get(r, 0.0)) for r in row_order]
    return MilpProblem(name, variables, constraints, objective, constant)

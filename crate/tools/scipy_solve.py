#!/usr/bin/env python3
"""Reference solver for the exec backend protocol.

Usage: scipy_solve.py model.mps out.sol

Reads the free-format MPS dialect written by the crate (explicit bounds,
INTORG/INTEND markers, constant objective as a flipped-sign RHS entry on the
objective row), solves min c'x with scipy's HiGHS wrapper, and writes `name
value` lines plus an `=status=` line. Used in tests as an independent check
on the embedded simplex and branch-and-bound.
"""

import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp


def parse_mps(path):
    obj_row = None
    row_sense = {}
    row_order = []
    cols = {}
    col_order = []
    integer = set()
    rhs = {}
    lb = {}
    ub = {}
    obj_offset = 0.0

    section = None
    in_int = False
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("*"):
                continue
            head = raw.split()
            if raw[0] not in " \t":
                section = head[0]
                continue
            if section == "ROWS":
                tag, name = head
                if tag == "N":
                    obj_row = name
                else:
                    row_sense[name] = tag
                    row_order.append(name)
            elif section == "COLUMNS":
                if len(head) >= 3 and head[1] == "'MARKER'":
                    in_int = head[2] == "'INTORG'"
                    continue
                name = head[0]
                if name not in cols:
                    cols[name] = {}
                    col_order.append(name)
                    if in_int:
                        integer.add(name)
                for row, val in zip(head[1::2], head[2::2]):
                    cols[name][row] = cols[name].get(row, 0.0) + float(val)
            elif section == "RHS":
                for row, val in zip(head[1::2], head[2::2]):
                    if row == obj_row:
                        obj_offset = -float(val)
                    else:
                        rhs[row] = float(val)
            elif section == "BOUNDS":
                kind, _, name = head[0], head[1], head[2]
                val = float(head[3]) if len(head) > 3 else 0.0
                if kind == "BV":
                    lb[name], ub[name] = 0.0, 1.0
                elif kind == "FX":
                    lb[name], ub[name] = val, val
                elif kind == "LO":
                    lb[name] = val
                elif kind == "UP":
                    ub[name] = val
                elif kind == "MI":
                    lb[name] = -np.inf
                elif kind == "PL":
                    ub[name] = np.inf
                else:
                    raise ValueError(f"unsupported bound kind {kind}")
            elif section == "RANGES":
                raise ValueError("RANGES not supported")
            elif section == "ENDATA":
                break

    n = len(col_order)
    col_ix = {name: j for j, name in enumerate(col_order)}
    c = np.zeros(n)
    for name, entries in cols.items():
        if obj_row in entries:
            c[col_ix[name]] = entries[obj_row]

    m = len(row_order)
    a = np.zeros((m, n))
    row_ix = {name: i for i, name in enumerate(row_order)}
    for name, entries in cols.items():
        j = col_ix[name]
        for row, val in entries.items():
            if row != obj_row:
                a[row_ix[row], j] = val
    con_lb = np.full(m, -np.inf)
    con_ub = np.full(m, np.inf)
    for name in row_order:
        i = row_ix[name]
        b = rhs.get(name, 0.0)
        tag = row_sense[name]
        if tag in ("L", "E"):
            con_ub[i] = b
        if tag in ("G", "E"):
            con_lb[i] = b

    v_lb = np.array([lb.get(name, 0.0) for name in col_order])
    v_ub = np.array([ub.get(name, np.inf) for name in col_order])
    integrality = np.array([1 if name in integer else 0 for name in col_order])
    return col_order, c, obj_offset, a, con_lb, con_ub, v_lb, v_ub, integrality


def main():
    if len(sys.argv) != 3:
        print("usage: scipy_solve.py model.mps out.sol", file=sys.stderr)
        return 2
    names, c, off, a, con_lb, con_ub, v_lb, v_ub, integ = parse_mps(sys.argv[1])

    constraints = [LinearConstraint(a, con_lb, con_ub)] if a.shape[0] else []
    res = milp(
        c,
        constraints=constraints,
        bounds=Bounds(v_lb, v_ub),
        integrality=integ,
        options={"mip_rel_gap": 1e-9},
    )
    # milp status: 0 optimal, 1 iteration/time limit, 2 infeasible, 3 unbounded
    status = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded"}.get(res.status, "limit")

    with open(sys.argv[2], "w") as out:
        out.write(f"=status= {status}\n")
        if res.x is not None:
            out.write(f"# objective {res.fun + off}\n")
            for name, val in zip(names, res.x):
                out.write(f"{name} {val}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

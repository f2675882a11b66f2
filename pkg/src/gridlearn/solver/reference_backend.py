"""Stand-alone MPS solver used as the default external backend.

Usage: ``python -m gridlearn.solver.reference_backend input.mps output.txt``

Solves LPs and MILPs with scipy's HiGHS mixed-integer interface (a code path
independent of the builtin tree search) and writes the plain solution
dialect.  Quadratic objectives are rejected.
"""

from __future__ import annotations

import sys

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .mps import column_names, format_solution, parse_mps


def solve_mps_text(text: str) -> str:
    prob = parse_mps(text)
    if prob.has_quadratic():
        raise SystemExit("reference backend handles linear objectives only")
    n = prob.n_z
    cons = []
    if prob.n_eq:
        cons.append(LinearConstraint(prob.A, prob.b, prob.b))
    if prob.n_ineq:
        cons.append(LinearConstraint(prob.G, -np.inf, prob.h))
    integrality = np.zeros(n)
    integrality[:prob.n_I] = 1
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[:prob.n_I] = 0.0
    ub[:prob.n_I] = 1.0
    res = milp(c=prob.q, constraints=cons, integrality=integrality,
               bounds=Bounds(lb, ub),
               options={"mip_rel_gap": 1e-9})
    names = column_names(prob)
    if res.status == 2:
        return format_solution("infeasible")
    if res.status == 3:
        return format_solution("unbounded")
    if res.x is None:
        return format_solution("infeasible")
    obj = float(prob.q @ res.x) + prob.obj_const
    gap = float(res.mip_gap) if res.mip_gap is not None else 0.0
    return format_solution("optimal", res.x, obj, gap, names)


def main(argv=None):
    argv = argv if argv is not None else sys.argv[1:]
    if len(argv) != 2:
        print("usage: reference_backend input.mps output.txt", file=sys.stderr)
        return 2
    with open(argv[0], "r", encoding="utf-8") as f:
        text = f.read()
    out = solve_mps_text(text)
    with open(argv[1], "w", encoding="utf-8") as f:
        f.write(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""LP subproblem interface.

Relaxations and fixed-binary subproblems are linear programs

    min c'x  s.t.  A x = b,  G x <= h,  per-variable bounds

solved through scipy's HiGHS bindings (deterministic, single threaded).
Duals follow the stationarity convention ``c + A' lam + G' mu = 0, mu >= 0``,
i.e. the negated HiGHS marginals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import NumericalBreakdown

__all__ = ["LpResult", "solve_lp"]

_FACTOR_TOL = 1e-9


@dataclass
class LpResult:
    status: str              # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float
    duals_eq: np.ndarray | None
    duals_ineq: np.ndarray | None
    iterations: int


def solve_lp(c, A=None, b=None, G=None, h=None, bounds=None) -> LpResult:
    """Solve one LP.  Empty constraint blocks may be passed as None or
    zero-row matrices; ``bounds`` is a per-variable (lb, ub) sequence where
    None means free (the canonical form keeps real bounds as rows of G)."""
    n = len(c)
    if A is not None and A.shape[0] == 0:
        A, b = None, None
    if G is not None and G.shape[0] == 0:
        G, h = None, None
    if bounds is None:
        bounds = [(None, None)] * n
    res = linprog(c, A_ub=G, b_ub=h, A_eq=A, b_eq=b, bounds=bounds,
                  method="highs")
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        lam = mu = None
        if res.eqlin is not None and res.eqlin.marginals is not None:
            lam = -np.asarray(res.eqlin.marginals, dtype=float)
        if res.ineqlin is not None and res.ineqlin.marginals is not None:
            mu = -np.asarray(res.ineqlin.marginals, dtype=float)
        return LpResult("optimal", np.asarray(res.x, dtype=float),
                        float(res.fun), lam, mu, iters)
    if res.status == 2:
        return LpResult("infeasible", None, np.inf, None, None, iters)
    if res.status == 3:
        return LpResult("unbounded", None, -np.inf, None, None, iters)
    raise NumericalBreakdown(f"LP core failed: status={res.status} {res.message}")

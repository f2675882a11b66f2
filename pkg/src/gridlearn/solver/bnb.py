"""Reference mixed-integer solver: best-first branch and bound over LP
relaxations, with a rounding heuristic and deterministic tie-breaking.

Branching rule: most fractional binary, ties broken by lowest index; node
selection is best-first on the parent relaxation bound with an insertion
counter as the final tie-break, so two runs on identical inputs explore
identical trees.
"""

from __future__ import annotations

import heapq
import time

import numpy as np
import scipy.sparse as sp

from ..optmodel.problem import ConcreteMIQP
from .errors import UnsupportedQuadratic
from .lpcore import solve_lp
from .types import (
    GAP_LIMIT,
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    Solution,
    SolveStats,
    SolverOptions,
)

__all__ = ["solve", "solve_builtin"]

_FEAS_TOL = 1e-6


def solve(prob: ConcreteMIQP, opts: SolverOptions | None = None,
          warm_start=None) -> Solution:
    """Solve a concrete problem with the configured backend.

    The builtin backend has two engines: the reference tree search (default;
    supports warm starts and deterministic node accounting) and "mip", which
    drives the same problem through scipy's HiGHS mixed-integer core for
    desk-scale studies.  Both return the same Solution contract, including
    fixed-binary duals at the incumbent.
    """
    opts = opts or SolverOptions()
    if opts.backend == "external":
        from .external import solve_external

        return solve_external(prob, opts)
    if opts.engine == "mip" and prob.n_I:
        return solve_mip(prob, opts)
    return solve_builtin(prob, opts, warm_start=warm_start)


def solve_mip(prob: ConcreteMIQP, opts: SolverOptions) -> Solution:
    """Library MIP core (HiGHS through scipy) behind the Solution contract."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    t0 = time.perf_counter()
    stats = SolveStats()
    c, A, b, G, h, n_orig = _model_arrays(prob, opts)
    n_ext = len(c)
    n_I = prob.n_I
    cons = []
    if A.shape[0]:
        cons.append(LinearConstraint(A, b, b))
    if G.shape[0]:
        cons.append(LinearConstraint(G, -np.inf, h))
    integrality = np.zeros(n_ext)
    integrality[:n_I] = 1
    lb = np.full(n_ext, -np.inf)
    ub = np.full(n_ext, np.inf)
    lb[:n_I] = 0.0
    ub[:n_I] = 1.0
    res = milp(c=c, constraints=cons, integrality=integrality,
               bounds=Bounds(lb, ub),
               options={"mip_rel_gap": opts.rel_gap,
                        "time_limit": opts.time_limit,
                        "node_limit": opts.node_limit})
    stats.wall_time = time.perf_counter() - t0
    stats.nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2:
        return Solution(status=INFEASIBLE, stats=stats)
    if res.status == 3:
        return Solution(status=UNBOUNDED, stats=stats)
    if res.x is None:
        return Solution(status=TIME_LIMIT if res.status == 1 else INFEASIBLE,
                        stats=stats)
    zb = np.round(res.x[:n_I])
    bounds = [(zb[i], zb[i]) for i in range(n_I)] + \
        [(None, None)] * (n_ext - n_I)
    fixed = solve_lp(c, A, b, G, h, bounds)
    stats.lp_iterations += fixed.iterations
    if fixed.status == "optimal":
        x = np.concatenate([zb, fixed.x[n_I:]])[:n_orig]
        duals_eq = fixed.duals_eq
        duals_ineq = (fixed.duals_ineq[:prob.n_ineq]
                      if fixed.duals_ineq is not None else None)
    else:
        x = res.x[:n_orig]
        duals_eq = duals_ineq = None
    gap = float(res.mip_gap) if getattr(res, "mip_gap", None) is not None else 0.0
    status = OPTIMAL if res.status == 0 else GAP_LIMIT
    return Solution(status=status, primal=x,
                    objective=prob.objective_value(x),
                    duals_eq=duals_eq, duals_ineq=duals_ineq,
                    binary_values=zb.astype(int),
                    gap=gap * abs(prob.objective_value(x)),
                    stats=stats)


def _pwl_expand(prob: ConcreteMIQP, opts: SolverOptions):
    """Replace a diagonal quadratic cost by a secant piecewise-linear
    epigraph (exact at breakpoints, convex upper interpolant elsewhere)."""
    d = prob.P.diagonal()
    off_diag = prob.P - sp.diags(d)
    if off_diag.nnz and np.max(np.abs(off_diag.data)) > 0:
        raise UnsupportedQuadratic(
            "builtin backend supports diagonal quadratic costs only; "
            "use the external backend for general P")
    quad_idx = np.where(d > 0)[0]
    n = prob.n_z
    k = len(quad_idx)
    segs = opts.pwl_segments
    lo, hi = opts.quad_range
    bps = np.linspace(lo, hi, segs + 1)
    # Extended variable vector [x, t] with t_i the epigraph of 0.5*d_i*x_i^2.
    c = np.concatenate([prob.q, np.ones(k)])
    rows, cols, data, rhs = [], [], [], []
    r = 0
    for j, i in enumerate(quad_idx):
        p = d[i]
        for s in range(segs):
            x0, x1 = bps[s], bps[s + 1]
            slope = 0.5 * p * (x0 + x1)           # secant slope of 0.5*p*x^2
            icept = -0.5 * p * x0 * x1            # so cut is exact at x0, x1
            rows += [r, r]
            cols += [i, n + j]
            data += [slope, -1.0]
            rhs.append(icept)
            r += 1
    Gq = sp.csr_matrix((data, (rows, cols)), shape=(r, n + k))
    G = sp.hstack([prob.G, sp.csr_matrix((prob.n_ineq, k))], format="csr")
    G = sp.vstack([G, Gq], format="csr")
    h = np.concatenate([prob.h, -np.asarray(rhs)])
    A = sp.hstack([prob.A, sp.csr_matrix((prob.n_eq, k))], format="csr")
    return c, A, prob.b.copy(), G, h, n


def _model_arrays(prob: ConcreteMIQP, opts: SolverOptions):
    if prob.has_quadratic():
        return _pwl_expand(prob, opts)
    return prob.q.copy(), prob.A, prob.b, prob.G, prob.h, prob.n_z


def _check_incumbent(prob, x, tol):
    if x is None:
        return False
    if prob.feasibility_residual(x) > _FEAS_TOL * 10:
        return False
    if prob.n_I:
        z = x[:prob.n_I]
        if np.max(np.abs(z - np.round(z))) > tol:
            return False
    return True


def solve_builtin(prob: ConcreteMIQP, opts: SolverOptions,
                  warm_start=None) -> Solution:
    t0 = time.perf_counter()
    stats = SolveStats()
    c, A, b, G, h, n_orig = _model_arrays(prob, opts)
    n_ext = len(c)
    n_I = prob.n_I

    def lp(fixes):
        bounds = [(None, None)] * n_ext
        for i in range(n_I):
            bounds[i] = (0.0, 1.0)
        for i, v in fixes.items():
            bounds[i] = (v, v)
        res = solve_lp(c, A, b, G, h, bounds)
        stats.lp_iterations += res.iterations
        return res

    def finish(status, inc_x, inc_obj, bound):
        stats.wall_time = time.perf_counter() - t0
        if inc_x is None:
            return Solution(status=status, stats=stats)
        gap = max(0.0, inc_obj - bound)
        duals_eq = duals_ineq = None
        if n_I:
            zb = np.round(inc_x[:n_I])
            fix = {i: zb[i] for i in range(n_I)}
            res = lp(fix)
            if res.status == "optimal":
                inc_x = np.concatenate([zb, res.x[n_I:]])
                duals_eq, duals_ineq = res.duals_eq, res.duals_ineq
        # PWL epigraph rows are appended after the problem's own rows; the
        # reported duals cover the problem rows only.
        if duals_ineq is not None:
            duals_ineq = duals_ineq[:prob.n_ineq]
        sol_x = inc_x[:n_orig]
        return Solution(
            status=status,
            primal=sol_x,
            objective=prob.objective_value(sol_x),
            duals_eq=duals_eq if n_I else _root_duals[0],
            duals_ineq=duals_ineq if n_I else _root_duals[1],
            binary_values=np.round(sol_x[:n_I]).astype(int) if n_I else np.zeros(0, dtype=int),
            gap=gap,
            stats=stats)

    _root_duals = (None, None)

    # Continuous problem: a single LP.
    if n_I == 0:
        res = lp({})
        stats.nodes = 1
        if res.status == "infeasible":
            return finish(INFEASIBLE, None, np.nan, np.nan)
        if res.status == "unbounded":
            return finish(UNBOUNDED, None, np.nan, np.nan)
        mu = res.duals_ineq[:prob.n_ineq] if res.duals_ineq is not None else None
        _root_duals = (res.duals_eq, mu)
        return finish(OPTIMAL, res.x, res.objective + prob.obj_const,
                      res.objective + prob.obj_const)

    # Warm start becomes the initial incumbent when feasible and integral.
    inc_x, inc_obj = None, np.inf
    if warm_start is not None:
        w = np.asarray(warm_start, dtype=float)
        if w.shape == (n_orig,) and _check_incumbent(prob, w, opts.integrality_tol):
            if n_ext > n_orig:
                w = np.concatenate([w, np.zeros(n_ext - n_orig)])
                # Epigraph values must sit on the secant interpolant, which
                # upper-bounds the quadratic between breakpoints.
                d = prob.P.diagonal()
                qi = np.where(d > 0)[0]
                lo, hi = opts.quad_range
                bps = np.linspace(lo, hi, opts.pwl_segments + 1)
                for jj, ii in enumerate(qi):
                    w[n_orig + jj] = np.interp(w[ii], bps, 0.5 * d[ii] * bps ** 2)
            inc_x = w
            inc_obj = float(c @ w) + prob.obj_const

    def fractional(x):
        z = x[:n_I]
        frac = np.abs(z - np.round(z))
        if opts.branch_rule == "first_fractional":
            cand = np.where(frac > opts.integrality_tol)[0]
            if cand.size:
                j = int(cand[0])
                return (j, frac[j])
        j = int(np.argmax(frac))
        return (j, frac[j])

    def rounding_heuristic(x):
        nonlocal inc_x, inc_obj
        zb = np.clip(np.round(x[:n_I]), 0, 1)
        res = lp({i: zb[i] for i in range(n_I)})
        if res.status == "optimal":
            obj = res.objective + prob.obj_const
            if obj < inc_obj - 1e-12:
                inc_x, inc_obj = res.x, obj

    root = lp({})
    stats.nodes = 1
    if root.status == "infeasible":
        return finish(INFEASIBLE, None, np.nan, np.nan)
    if root.status == "unbounded":
        return finish(UNBOUNDED, None, np.nan, np.nan)

    def gap_ok(best_obj, bound):
        return best_obj - bound <= max(opts.abs_gap, opts.rel_gap * abs(best_obj)) + 1e-12

    j, f = fractional(root.x)
    if f <= opts.integrality_tol:
        obj = root.objective + prob.obj_const
        if obj < inc_obj:
            inc_x, inc_obj = root.x, obj
        return finish(OPTIMAL, inc_x, inc_obj, min(inc_obj, root.objective + prob.obj_const))

    rounding_heuristic(root.x)

    depth_first = opts.node_order == "depth"
    counter = 0

    def node_key(bound, cnt):
        return (-cnt,) if depth_first else (bound, cnt)

    heap = [(node_key(root.objective, counter), root.objective, {}, root.x)]
    best_bound = root.objective
    found_first = inc_x is not None and opts.first_feasible

    status = OPTIMAL
    while heap and not found_first:
        if time.perf_counter() - t0 > opts.time_limit:
            status = TIME_LIMIT
            break
        if stats.nodes >= opts.node_limit:
            status = GAP_LIMIT
            break
        _, bound, fixes, xparent = heapq.heappop(heap)
        if not depth_first:
            best_bound = bound
            if inc_x is not None and gap_ok(inc_obj, bound + prob.obj_const):
                break
        elif inc_x is not None and bound >= inc_obj - prob.obj_const - 1e-12:
            continue
        j, f = fractional(xparent)
        preferred = 1.0 if xparent[j] >= 0.5 else 0.0
        order = (1.0 - preferred, preferred) if depth_first else (0.0, 1.0)
        for val in order:
            child = dict(fixes)
            child[j] = val
            res = lp(child)
            stats.nodes += 1
            if res.status != "optimal":
                continue
            if inc_x is not None and res.objective >= inc_obj - prob.obj_const - 1e-12:
                continue
            jj, ff = fractional(res.x)
            if ff <= opts.integrality_tol:
                obj = res.objective + prob.obj_const
                if obj < inc_obj:
                    inc_x, inc_obj = res.x, obj
                    if opts.first_feasible:
                        found_first = True
                        break
            else:
                counter += 1
                heapq.heappush(heap, (node_key(res.objective, counter),
                                      res.objective, child, res.x))
        if found_first:
            break
        if stats.nodes % opts.heuristic_period == 0 and heap:
            rounding_heuristic(heap[0][3])
            if inc_x is not None and opts.first_feasible:
                break

    if inc_x is None:
        if status in (TIME_LIMIT, GAP_LIMIT):
            stats.wall_time = time.perf_counter() - t0
            return Solution(status=status, stats=stats)
        return finish(INFEASIBLE, None, np.nan, np.nan)
    if heap:
        best_bound = min(best_bound, min(e[1] for e in heap))
    elif status == OPTIMAL and not found_first:
        best_bound = inc_obj - prob.obj_const
    if found_first:
        status = GAP_LIMIT if inc_obj - (best_bound + prob.obj_const) > \
            max(opts.abs_gap, opts.rel_gap * abs(inc_obj)) else OPTIMAL
    return finish(status, inc_x, inc_obj, best_bound + prob.obj_const)

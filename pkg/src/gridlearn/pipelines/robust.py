"""Robust forecaster training against wait-and-see load uncertainty.

The redispatch-stage load lives in a per-sample box; training minimises the
mean of (first-stage energy cost + worst-case recourse).  The solution
scheme is column-and-constraint generation:

1. start with the nominal load as the only scenario per sample;
2. solve the main problem: forecaster weights + dispatch KKT blocks +
   one recourse copy per accumulated scenario, epigraph variables bounding
   every copy's cost (lower bound);
3. for the main solution's dispatch, find each sample's worst box vertex
   (exact enumeration, or the KKT reformulation for wide boxes) and update
   the upper bound;
4. stop when the bounds meet, otherwise add the new scenarios as cuts.

Recourse is always feasible (shedding/storage slacks), so no feasibility
cuts are needed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from ..kkt import form_kkt, kkt_assignment
from ..learners import AffineForecaster
from ..optmodel.builder import ProblemBuilder
from ..optmodel.problem import substitute_parameters, vector_from_values
from ..solver import SolverOptions
from ..solver.bnb import solve
from .costs import forward_chain
from .obf import _block_selector, forecast_matrix

__all__ = ["UncertaintySet", "CcgTrace", "ccg_train", "worst_case_cost",
           "worst_recourse", "embed_linear_problem", "IterationLimit",
           "SubproblemFailure", "ENUM_LIMIT"]

ENUM_LIMIT = 12          # enumerate boxes up to 2^12 vertices


class IterationLimit(Exception):
    pass


class SubproblemFailure(Exception):
    pass


@dataclass
class UncertaintySet:
    """Per-sample box on the redispatch-stage load."""

    lo: np.ndarray           # (S, n_load)
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.atleast_2d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_2d(np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo/hi shapes differ")
        if np.any(self.lo > self.hi + 1e-12):
            raise ValueError("lower bound exceeds upper bound")

    @staticmethod
    def from_budget(loads, fraction):
        loads = np.atleast_2d(np.asarray(loads, dtype=float))
        return UncertaintySet(lo=loads * (1 - fraction),
                              hi=loads * (1 + fraction))

    def vertices(self, i):
        """Deterministic vertex enumeration (degenerate axes collapse)."""
        axes = []
        for j in range(self.lo.shape[1]):
            a, b = self.lo[i, j], self.hi[i, j]
            axes.append((a,) if a == b else (a, b))
        return [np.asarray(v) for v in itertools.product(*axes)]


@dataclass
class CcgTrace:
    lower_bounds: list = field(default_factory=list)
    upper_bounds: list = field(default_factory=list)
    worst_vertices: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def embed_linear_problem(bld: ProblemBuilder, prob, prefix, fixed=None,
                         linked=None):
    """Copy a continuous linear problem's rows over a fresh variable block.

    Parameters named in ``fixed`` take numeric values (folded into the
    right-hand sides); those in ``linked`` take expressions over existing
    builder variables.  Returns ``(x_handle, cost_expr)``.
    """
    if prob.n_I:
        raise ValueError("embed_linear_problem needs a continuous problem")
    if prob.has_quadratic():
        raise ValueError("embed_linear_problem needs a linear objective")
    fixed = fixed or {}
    linked = linked or {}
    x = bld.variable(f"{prefix}x", prob.n_z)

    def rows(M, rhs, blocks, sense, name):
        expr = M.toarray() @ x.expr()
        rhs = rhs.copy()
        for pname, (slot, dim) in prob.param_names.items():
            B = blocks[slot]
            if B is None or not B.nnz:
                continue
            if pname in fixed:
                rhs = rhs + B @ np.asarray(fixed[pname], dtype=float).ravel()
            elif pname in linked:
                expr = expr - B.toarray() @ linked[pname]
            else:
                raise KeyError(f"parameter {pname!r} neither fixed nor linked")
        if sense == "eq":
            bld.constrain(expr == rhs, name)
        else:
            bld.constrain(expr <= rhs, name)

    if prob.n_eq:
        rows(prob.A, prob.b, prob.Bp, "eq", f"{prefix}eq")
    if prob.n_ineq:
        rows(prob.G, prob.h, prob.Hp, "ineq", f"{prefix}ineq")
    for pname, (slot, dim) in prob.param_names.items():
        Q = prob.Qp[slot]
        if Q is not None and Q.nnz:
            raise ValueError("linked problems may not couple parameters into costs")
    cost = prob.q[None, :] @ x.expr()
    return x, cost


def recourse_value(rd_prob, load, solar, base, opts) -> float:
    conc = substitute_parameters(rd_prob, {"load": load, "solar": solar,
                                           "base_dispatch": base})
    sol = solve(conc, opts)
    if not sol.ok:
        raise SubproblemFailure(f"recourse solve failed: {sol.status}")
    return sol.objective


def worst_recourse(rd_prob, lo, hi, solar, base,
                   opts: SolverOptions | None = None, method="auto",
                   big_m=1e4):
    """Worst-case recourse cost over a load box; returns (value, vertex).

    ``method`` "enum" enumerates vertices (exact; the worst point of a
    concave-in-load minimum over a box is at a vertex); "kkt" maximises the
    cost over the redispatch optimality system with the load free in the
    box; "auto" enumerates up to ENUM_LIMIT wide boxes, else uses "kkt".
    """
    opts = opts or SolverOptions()
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    wide = int(np.sum(hi > lo))
    if method == "auto":
        method = "enum" if wide <= ENUM_LIMIT else "kkt"
    if method == "enum":
        axes = [(a,) if a == b else (a, b) for a, b in zip(lo, hi)]
        best_val, best_vertex = -np.inf, None
        for combo in itertools.product(*axes):
            v = np.asarray(combo)
            val = recourse_value(rd_prob, v, solar, base, opts)
            if val > best_val + 1e-12:
                best_val, best_vertex = val, v
        return best_val, best_vertex
    if method != "kkt":
        raise ValueError(f"unknown method {method!r}")

    bld = ProblemBuilder()
    sys = form_kkt(rd_prob, big_m=big_m, builder=bld, prefix="w_")
    y = sys.params["load"]
    bld.constrain(y.expr() <= hi, "box_hi")
    bld.constrain(-1.0 * y.expr() <= -lo, "box_lo")
    bld.constrain(sys.params["solar"].expr() == np.asarray(solar, float),
                  "fix_solar")
    bld.constrain(sys.params["base_dispatch"].expr()
                  == np.asarray(base, float), "fix_base")
    bld.cost_linear(-rd_prob.q[None, :] @ sys.x.expr())
    lowered = bld.lower()
    conc = substitute_parameters(lowered, {})
    sol = solve(conc, replace(opts, abs_gap=1e-9, rel_gap=1e-9))
    if not sol.ok:
        raise SubproblemFailure(f"kkt subproblem failed: {sol.status}")
    value = -sol.objective + rd_prob.obj_const
    vertex = sol.value_of(conc, "w_param_load")
    return value, vertex


def worst_case_cost(grid, dp_prob, rd_prob, forecaster, features, loads,
                    solars, uset: UncertaintySet,
                    opts: SolverOptions | None = None) -> float:
    """Mean worst-case settled cost of fixed weights (forward dispatch plus
    the worst box vertex per sample)."""
    opts = opts or SolverOptions()
    feats = np.atleast_2d(features)
    loads = np.atleast_2d(loads)
    solars = np.atleast_2d(solars)
    cg = np.asarray(grid.cost_energy)
    total = 0.0
    for i in range(len(feats)):
        fc = forecaster.predict(feats[i][None, :])[0]
        out = forward_chain(grid, dp_prob, rd_prob, loads[i], fc, solars[i],
                            opts)
        pg = out["dp_values"]["pg"]
        val, _ = worst_recourse(rd_prob, uset.lo[i], uset.hi[i], solars[i],
                                pg, opts)
        total += float(cg @ pg) + val
    return total / len(feats)


def _build_main(grid, dp_prob, rd_prob, feats, loads, solars, cuts, big_m):
    S, nf = feats.shape
    nr = solars.shape[1]
    bld = ProblemBuilder()
    W = bld.variable("Wf", (nf, nr))
    bvar = bld.variable("bf", nr)
    eta = bld.variable("eta", S, lb=0.0)
    cg = np.asarray(grid.cost_energy)
    S_pg = _block_selector(dp_prob, "pg")
    dp_systems = []
    cost = None
    for i in range(S):
        dpk = form_kkt(dp_prob, big_m=big_m, builder=bld, prefix=f"s{i}d_")
        dp_systems.append(dpk)
        yhat = forecast_matrix(feats[i], nr) @ W.expr() + bvar.expr()
        bld.constrain(dpk.params["load"].expr() == loads[i], f"s{i}_dload")
        bld.constrain(dpk.params["solar"].expr() == yhat, f"s{i}_dfc")
        pg_expr = S_pg @ dpk.x.expr()
        for l, vertex in enumerate(cuts[i]):
            xc, rc_cost = embed_linear_problem(
                bld, rd_prob, prefix=f"c{i}_{l}_",
                fixed={"load": vertex, "solar": solars[i]},
                linked={"base_dispatch": pg_expr})
            bld.constrain(rc_cost - eta[i] <= 0.0, f"cut{i}_{l}")
        term = cg[None, :] @ pg_expr + eta[i]
        cost = term if cost is None else cost + term
    bld.cost_linear((1.0 / S) * cost)
    return bld, {"W": W, "b": bvar, "eta": eta, "dp": dp_systems}


def _main_warm_start(lowered, handles, grid, dp_prob, rd_prob, forecaster,
                     feats, loads, solars, cuts, opts):
    values = {"Wf": forecaster.W.ravel(), "bf": forecaster.b}
    S = len(feats)
    etas = np.zeros(S)
    for i in range(S):
        fc = forecaster.predict(feats[i][None, :])[0]
        out = forward_chain(grid, dp_prob, rd_prob, loads[i], fc, solars[i],
                            opts)
        values.update(kkt_assignment(handles["dp"][i],
                                     {"load": loads[i], "solar": fc},
                                     out["dp_solution"]))
        pg = out["dp_values"]["pg"]
        worst = 0.0
        for l, vertex in enumerate(cuts[i]):
            conc = substitute_parameters(rd_prob, {
                "load": vertex, "solar": solars[i], "base_dispatch": pg})
            sol = solve(conc, opts)
            if not sol.ok:
                raise SubproblemFailure(f"warm start recourse: {sol.status}")
            values[f"c{i}_{l}_x"] = sol.primal
            worst = max(worst, sol.objective)
        etas[i] = worst
    values["eta"] = etas
    return vector_from_values(lowered, values)


def ccg_train(grid, dp_prob, rd_prob, features, loads, solars,
              uset: UncertaintySet, eps=1e-3, max_iter=25, big_m=1e4,
              opts: SolverOptions | None = None, node_budget=3000,
              subproblem="auto", initial: AffineForecaster | None = None):
    """Column-and-constraint generation; returns (forecaster, trace).

    The scenario pools start from the nominal load, so a zero-width box
    collapses to the non-robust training problem and converges immediately.
    On hitting ``max_iter`` the best incumbent is returned with the trace
    (converged=False) rather than raising.
    """
    opts = opts or SolverOptions()
    feats = np.atleast_2d(np.asarray(features, dtype=float))
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    solars = np.atleast_2d(np.asarray(solars, dtype=float))
    S = len(feats)
    nf, nr = feats.shape[1], solars.shape[1]
    cg = np.asarray(grid.cost_energy)
    if initial is None:
        from ..learners import fit_linear_least_squares

        initial = fit_linear_least_squares(feats, solars, ridge=1e-8)

    cuts = [[np.clip(loads[i], uset.lo[i], uset.hi[i])] for i in range(S)]
    trace = CcgTrace()
    ub = np.inf
    lb = -np.inf
    best = initial
    best_ub = np.inf
    warm_fc = initial

    main_opts = replace(opts, node_limit=node_budget, abs_gap=1e-7,
                        rel_gap=1e-7)
    for k in range(max_iter):
        bld, handles = _build_main(grid, dp_prob, rd_prob, feats, loads,
                                   solars, cuts, big_m)
        lowered = bld.lower()
        conc = substitute_parameters(lowered, {})
        warm = None
        if warm_fc is not None:
            warm = _main_warm_start(lowered, handles, grid, dp_prob, rd_prob,
                                    warm_fc, feats, loads, solars, cuts, opts)
        sol = solve(conc, main_opts, warm_start=warm)
        if not sol.ok:
            raise SubproblemFailure(f"main problem failed: {sol.status}")
        # proven bound of the tree search: valid even when the main solve
        # stops on a node budget with a residual gap
        proven = sol.objective - (sol.gap if np.isfinite(sol.gap) else 0.0)
        lb = max(lb, proven)
        Wv = sol.value_of(conc, "Wf").reshape(nf, nr)
        bv = sol.value_of(conc, "bf")
        cand = AffineForecaster(Wv, bv)

        vertices = []
        total = 0.0
        for i in range(S):
            pg = sol.primal[conc.var_slice(f"s{i}d_x")][
                dp_prob.var_slice("pg")]
            val, vertex = worst_recourse(rd_prob, uset.lo[i], uset.hi[i],
                                         solars[i], pg, opts,
                                         method=subproblem, big_m=big_m)
            vertices.append(vertex)
            total += float(cg @ pg) + val
        ub_k = total / S
        if ub_k < best_ub - 1e-12:
            best_ub, best = ub_k, cand
        ub = min(ub, ub_k)
        trace.lower_bounds.append(lb)
        trace.upper_bounds.append(ub)
        trace.worst_vertices.append(vertices)
        trace.iterations = k + 1
        warm_fc = cand
        if ub - lb <= eps:
            trace.converged = True
            break
        added = False
        for i in range(S):
            known = any(np.allclose(vertices[i], v) for v in cuts[i])
            if not known:
                cuts[i].append(vertices[i])
                added = True
        if not added:
            # scenario pools are complete: the residual gap is the main
            # problem's own tree gap, which more iterations cannot shrink
            break
    return best, trace

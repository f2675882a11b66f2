"""KKT rewriting of continuous convex problems with big-M complementarity.

A continuous problem

    min 1/2 x'Px + (q + sum Qp y_p)'x
    s.t. A x  = b + sum Bp y_p        (duals lam, free)
         G x <= h + sum Hp y_p        (duals mu >= 0)

is replaced by its first-order optimality system, linearised with indicator
binaries delta (one per inequality row):

    P x + q + sum Qp y_p + A'lam + G'mu = 0
    A x - sum Bp y_p = b
    G x - sum Hp y_p <= h
    mu >= 0
    mu_j <= M delta_j
    h_j + sum (Hp y_p)_j - (G x)_j <= M (1 - delta_j)

Parameters become free variables of the emitted block so the system can be
embedded inside a larger program and linked to other blocks (the optimistic
bilevel convention: the outer objective selects among degenerate optima).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .optmodel.builder import ProblemBuilder
from .optmodel.problem import PSD_TOL, ParametricMIQP, substitute_parameters
from .solver import OPTIMAL, Solution, SolverOptions
from .solver.bnb import solve as _solve
from .solver.lpcore import solve_lp

__all__ = ["KKTSystem", "KKTReport", "form_kkt", "verify_kkt",
           "solve_embedded", "kkt_assignment", "HasBinaries", "NonConvex",
           "BigMSaturation"]

DEFAULT_BIG_M = 1e4
SATURATION_FRACTION = 0.99


class HasBinaries(Exception):
    """The lower level must be continuous."""


class NonConvex(Exception):
    """The lower-level quadratic cost is not positive semidefinite."""


class BigMSaturation(Warning):
    """A dual or slack value approaches the big-M constant."""


@dataclass
class KKTSystem:
    """Handles into the emitted constraint block.

    ``x``, ``lam``, ``mu``, ``delta`` are Variable handles inside ``builder``;
    ``params`` maps each source parameter name to its parameter-as-variable
    handle.  ``source`` is the originating problem.
    """

    builder: ProblemBuilder
    x: object
    lam: object
    mu: object
    delta: object
    params: dict
    big_m: float
    source: ParametricMIQP
    prefix: str = ""


def form_kkt(prob: ParametricMIQP, big_m: float = DEFAULT_BIG_M,
             builder: ProblemBuilder | None = None, prefix: str = "") -> KKTSystem:
    """Emit the linearised KKT system of ``prob`` into ``builder``.

    A fresh builder is created when none is given.  All variable and row
    names carry ``prefix`` so several systems can share one program.
    """
    if prob.n_I != 0:
        raise HasBinaries(
            f"lower level has {prob.n_I} binary variables; it must be continuous")
    if prob.P.nnz:
        lam_min = float(np.linalg.eigvalsh(prob.P.toarray()).min())
        if lam_min < -PSD_TOL:
            raise NonConvex(f"P has eigenvalue {lam_min:.3e}")
    if big_m <= 0:
        raise ValueError("big_m must be positive")

    bld = builder if builder is not None else ProblemBuilder()
    n, me, mi = prob.n_z, prob.n_eq, prob.n_ineq
    x = bld.variable(f"{prefix}x", n)
    lam = bld.variable(f"{prefix}lam", max(me, 1)) if me else None
    mu = bld.variable(f"{prefix}mu", max(mi, 1), lb=0.0) if mi else None
    delta = bld.variable(f"{prefix}delta", max(mi, 1), binary=True) if mi else None
    params = {}
    for pname, (slot, dim) in prob.param_names.items():
        params[pname] = bld.variable(f"{prefix}param_{pname}", dim)

    Pd = prob.P.toarray() if prob.P.nnz else None
    stat = prob.q.copy()
    expr = (Pd @ x.expr()) if Pd is not None else 0.0 * x.expr()
    if me:
        expr = expr + prob.A.toarray().T @ lam.expr()
    if mi:
        expr = expr + prob.G.toarray().T @ mu.expr()
    for pname, (slot, dim) in prob.param_names.items():
        Q = prob.Qp[slot]
        if Q is not None and Q.nnz:
            expr = expr + Q.toarray() @ params[pname].expr()
    bld.constrain(expr == -stat, f"{prefix}stationarity")

    if me:
        e = prob.A.toarray() @ x.expr()
        for pname, (slot, dim) in prob.param_names.items():
            B = prob.Bp[slot]
            if B is not None and B.nnz:
                e = e - B.toarray() @ params[pname].expr()
        bld.constrain(e == prob.b, f"{prefix}primal_eq")

    if mi:
        Gd = prob.G.toarray()
        e = Gd @ x.expr()
        slack_param = {}
        for pname, (slot, dim) in prob.param_names.items():
            H = prob.Hp[slot]
            if H is not None and H.nnz:
                e = e - H.toarray() @ params[pname].expr()
                slack_param[pname] = H.toarray()
        bld.constrain(e <= prob.h, f"{prefix}primal_ineq")

        bld.constrain(mu.expr() - big_m * delta.expr() <= 0.0,
                      f"{prefix}compl_dual")
        # slack <= M (1 - delta):  -Gx + sum Hp y + M delta <= M - h
        e2 = (-Gd) @ x.expr() + big_m * delta.expr()
        for pname, H in slack_param.items():
            e2 = e2 + H @ params[pname].expr()
        bld.constrain(e2 <= big_m - prob.h, f"{prefix}compl_slack")

    return KKTSystem(builder=bld, x=x, lam=lam, mu=mu, delta=delta,
                     params=params, big_m=big_m, source=prob, prefix=prefix)


@dataclass
class KKTReport:
    """Residuals of a candidate point against the source optimality system."""

    stationarity: float
    primal_eq: float
    primal_ineq: float
    dual: float
    complementarity: float
    saturated_rows: list = field(default_factory=list)

    def max_residual(self):
        return max(self.stationarity, self.primal_eq, self.primal_ineq,
                   self.dual, self.complementarity)

    def ok(self, tol=1e-6):
        return self.max_residual() <= tol and not self.saturated_rows


def verify_kkt(sys: KKTSystem, param_values: dict, candidate: dict) -> KKTReport:
    """Check a candidate {"x", "lam", "mu"} against the source problem.

    Values within 1 % of the big-M constant are flagged as saturation
    warnings: the linearisation is then untrustworthy and the caller should
    re-solve with a larger M and compare objectives.
    """
    prob = sys.source
    conc = substitute_parameters(prob, param_values)
    x = np.asarray(candidate["x"], dtype=float)
    lam = np.asarray(candidate.get("lam", np.zeros(prob.n_eq)), dtype=float)
    mu = np.asarray(candidate.get("mu", np.zeros(prob.n_ineq)), dtype=float)

    stat = conc.q + prob.P @ x
    if prob.n_eq:
        stat = stat + prob.A.T @ lam
    if prob.n_ineq:
        stat = stat + prob.G.T @ mu
    stationarity = float(np.max(np.abs(stat))) if len(stat) else 0.0
    primal_eq = float(np.max(np.abs(prob.A @ x - conc.b))) if prob.n_eq else 0.0
    slack = conc.h - prob.G @ x if prob.n_ineq else np.zeros(0)
    primal_ineq = float(max(0.0, np.max(-slack))) if prob.n_ineq else 0.0
    dual = float(max(0.0, np.max(-mu))) if prob.n_ineq else 0.0
    comp = float(np.max(np.abs(mu * slack))) if prob.n_ineq else 0.0

    saturated = []
    thresh = SATURATION_FRACTION * sys.big_m
    for j in range(prob.n_ineq):
        if mu[j] >= thresh or slack[j] >= thresh:
            saturated.append(j)
    if saturated:
        warnings.warn(
            f"{len(saturated)} rows within 1% of big-M={sys.big_m:g}; "
            "re-solve with 10x M and compare objectives", BigMSaturation)
    return KKTReport(stationarity=stationarity, primal_eq=primal_eq,
                     primal_ineq=primal_ineq, dual=dual, complementarity=comp,
                     saturated_rows=saturated)


def kkt_assignment(sys: KKTSystem, param_values: dict,
                   solution: Solution) -> dict:
    """Feasible block values from a direct solve of the source problem.

    delta_j = 1 exactly when the dual of row j is active; at degenerate rows
    (both zero) delta = 0 keeps both indicator rows satisfied.
    """
    prob = sys.source
    out = {f"{sys.prefix}x": np.asarray(solution.primal, dtype=float)}
    if prob.n_eq:
        out[f"{sys.prefix}lam"] = np.asarray(solution.duals_eq, dtype=float)
    if prob.n_ineq:
        mu = np.asarray(solution.duals_ineq, dtype=float)
        mu = np.maximum(mu, 0.0)
        out[f"{sys.prefix}mu"] = mu
        out[f"{sys.prefix}delta"] = (mu > 1e-9).astype(float)
    for pname in prob.param_names:
        out[f"{sys.prefix}param_{pname}"] = np.asarray(
            param_values[pname], dtype=float).ravel()
    return out


def solve_embedded(sys: KKTSystem, param_values: dict,
                   opts: SolverOptions | None = None) -> dict:
    """Fix the parameter-as-variable handles and find a point of the
    linearised system (a primal-dual optimal pair of the source problem).

    Works on a private re-emission of the system, so the caller's builder is
    left untouched and repeated calls with different values are fine.
    Returns the candidate mapping accepted by :func:`verify_kkt` plus the
    source objective value.  The search is cold: an active-set guess from
    the relaxation is tried first, then a depth-first tree search.
    """
    sys = form_kkt(sys.source, big_m=sys.big_m, prefix=sys.prefix)
    bld = sys.builder
    prob = sys.source
    cs = substitute_parameters(prob, param_values)
    for pname, handle in sys.params.items():
        y = np.asarray(param_values[pname], dtype=float).ravel()
        bld.constrain(handle.expr() == y, f"{sys.prefix}fix_{pname}")
    # The source objective guides the search.  Every point of the system is
    # optimal for the source problem, so on the relaxation (whose projection
    # onto x is exactly the primal feasible set) the bound meets the first
    # incumbent immediately; a diagonal quadratic joins through the solver's
    # piecewise-linear path, which only affects guidance, never feasibility.
    bld.cost_linear(cs.q[None, :] @ sys.x.expr())
    d = prob.P.diagonal()
    if prob.P.nnz and np.any(d):
        off = prob.P - sp.diags(d)
        if off.nnz == 0:
            bld.cost_quadratic(sys.x, sys.x, 0.5 * np.diag(d))
    lowered = bld.lower()
    conc = substitute_parameters(lowered, {})

    # Indicator guess from the relaxation: the relaxed x is primal optimal,
    # so rows tight there are the natural active set.
    guess = None
    n_ext = conc.n_z
    nI = conc.n_I
    bounds = [(0.0, 1.0)] * nI + [(None, None)] * (n_ext - nI)
    lin_q = conc.q if not conc.has_quadratic() else None
    if lin_q is not None and nI:
        rel = solve_lp(conc.q, conc.A, conc.b, conc.G, conc.h, bounds)
        if rel.status == "optimal":
            x_rel = rel.x[conc.var_slice(f"{sys.prefix}x")]
            slack = cs.h - prob.G @ x_rel
            dlt = (slack <= 1e-7).astype(float)
            b2 = list(bounds)
            dsl = conc.var_slice(f"{sys.prefix}delta")
            for k, j in enumerate(range(dsl.start, dsl.stop)):
                b2[j] = (dlt[k], dlt[k])
            res = solve_lp(conc.q, conc.A, conc.b, conc.G, conc.h, b2)
            if res.status == "optimal":
                guess = res.x

    if guess is None:
        sol = _solve(conc, opts or SolverOptions(first_feasible=True))
        if not sol.ok:
            raise RuntimeError(f"KKT system has no feasible point: {sol.status}")
        guess = sol.primal

    candidate = {
        "x": guess[conc.var_slice(f"{sys.prefix}x")],
        "lam": guess[conc.var_slice(f"{sys.prefix}lam")] if prob.n_eq else np.zeros(0),
        "mu": guess[conc.var_slice(f"{sys.prefix}mu")] if prob.n_ineq else np.zeros(0),
    }
    candidate["objective"] = substitute_parameters(
        prob, param_values).objective_value(candidate["x"])
    return candidate

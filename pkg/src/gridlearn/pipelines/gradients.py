"""Sensitivities through solved lower-level problems.

At a solution with a stable active set, the optimality system restricted to
the active rows is a square linear system in (x, lam, mu_active); its
implicit-function derivative with respect to a parameter gives the chain
rule for any scalar objective of the solution:

    total_grad = d(upper)/d(theta) + d(upper)/dx . dx/d(theta)

Strict complementarity is required (an inequality that is both tight and
dual-degenerate makes the derivative one-sided) and is reported as an error
rather than smoothed over.
"""

from __future__ import annotations

import numpy as np

from ..optmodel.problem import ParametricMIQP, substitute_parameters
from ..solver import SolverOptions
from ..solver.bnb import solve

__all__ = ["implicit_gradient", "solution_sensitivity", "gradient_cosine",
           "cosine_matrix", "mape", "DegenerateActiveSet", "SingularJacobian",
           "ZeroVector", "EmptyMask"]

_ACTIVE_TOL = 1e-7


class DegenerateActiveSet(Exception):
    """An inequality is tight with a (near-)zero dual: no two-sided derivative."""


class SingularJacobian(Exception):
    pass


class ZeroVector(Exception):
    pass


class EmptyMask(Exception):
    pass


def solution_sensitivity(prob: ParametricMIQP, param_values: dict,
                         theta: str, solution=None,
                         opts: SolverOptions | None = None,
                         tol: float = _ACTIVE_TOL) -> np.ndarray:
    """dx*/d(theta) for a continuous problem at its solution.

    Solves the problem when no solution is passed.  Returns an
    (n_z, dim_theta) Jacobian.
    """
    if prob.n_I:
        raise ValueError("sensitivities need a continuous problem")
    conc = substitute_parameters(prob, param_values)
    if solution is None:
        if prob.has_quadratic():
            # exact quadratic solve through the optimality system (the tree
            # solver's piecewise-linear path is an approximation)
            from ..kkt import form_kkt, solve_embedded

            cand = solve_embedded(form_kkt(prob), param_values,
                                  opts or SolverOptions())
            x = np.asarray(cand["x"], dtype=float)
        else:
            solution = solve(conc, opts or SolverOptions())
            if solution.status != "optimal":
                raise RuntimeError(f"lower level not solved: {solution.status}")
            x = np.asarray(solution.primal, dtype=float)
    else:
        x = np.asarray(solution.primal, dtype=float)
    slack = conc.h - prob.G @ x if prob.n_ineq else np.zeros(0)
    active = slack <= tol

    n, me = prob.n_z, prob.n_eq
    GA = prob.G.toarray()[active] if prob.n_ineq else np.zeros((0, n))
    na = GA.shape[0]
    P = prob.P.toarray() if prob.P.nnz else np.zeros((n, n))
    A = prob.A.toarray() if me else np.zeros((0, n))

    # Recover the duals of the active set from stationarity (exact for
    # quadratic costs, where the tree solver's piecewise duals are only
    # approximate).
    if me + na:
        lhs = np.vstack([A, GA]).T
        rhs_stat = -(P @ x + conc.q)
        duals, res, rank, _ = np.linalg.lstsq(lhs, rhs_stat, rcond=None)
        residual = np.max(np.abs(lhs @ duals - rhs_stat))
        if residual > 1e-6:
            raise DegenerateActiveSet(
                f"stationarity unmatched on the active set (residual {residual:.2e})")
        mu_a = duals[me:]
        if np.any(mu_a <= tol):
            raise DegenerateActiveSet(
                "tight inequality with (near-)zero dual: strict "
                "complementarity fails")
    J = np.zeros((n + me + na, n + me + na))
    J[:n, :n] = P
    J[:n, n:n + me] = A.T
    J[:n, n + me:] = GA.T
    J[n:n + me, :n] = A
    J[n + me:, :n] = GA

    slot, dim = prob.param_names[theta]
    Qp = prob.Qp[slot].toarray() if prob.Qp[slot] is not None else np.zeros((n, dim))
    Bp = prob.Bp[slot].toarray() if prob.Bp[slot] is not None else np.zeros((me, dim))
    Hp = prob.Hp[slot].toarray() if prob.Hp[slot] is not None else np.zeros((prob.n_ineq, dim))
    rhs = np.vstack([Qp, -Bp, -(Hp[active] if prob.n_ineq else Hp[:0])])
    try:
        d = np.linalg.solve(J, -rhs)
    except np.linalg.LinAlgError as e:
        raise SingularJacobian(str(e)) from e
    if not np.all(np.isfinite(d)):
        raise SingularJacobian("non-finite sensitivity")
    return d[:n]


def implicit_gradient(prob: ParametricMIQP, param_values: dict, theta: str,
                      upper_grad_x, upper_grad_theta=None, solution=None,
                      opts: SolverOptions | None = None,
                      tol: float = _ACTIVE_TOL) -> np.ndarray:
    """Total derivative of an upper objective through the lower solution.

    ``upper_grad_x`` is d(upper)/dx at the solution; ``upper_grad_theta``
    the explicit part (defaults to zero).
    """
    dx = solution_sensitivity(prob, param_values, theta, solution=solution,
                              opts=opts, tol=tol)
    gx = np.asarray(upper_grad_x, dtype=float).ravel()
    if gx.shape != (prob.n_z,):
        raise ValueError(f"upper_grad_x must have length {prob.n_z}")
    g = gx @ dx
    if upper_grad_theta is not None:
        g = g + np.asarray(upper_grad_theta, dtype=float).ravel()
    return g


def chain_cost_gradient(grid, dp_prob, rd_prob, forecaster, x_feat, load,
                        solar, opts: SolverOptions | None = None):
    """d(settled cost)/d(W, b) for one sample, flattened [vec(W), b].

    The redispatch value function is differentiated by the envelope theorem
    (its duals against the base-dispatch coupling blocks); the dispatch
    argmin by the implicit function theorem; the linear forecaster closes
    the chain.  Raises DegenerateActiveSet when the dispatch active set is
    not differentiable at this sample.
    """
    opts = opts or SolverOptions()
    from .costs import forward_chain

    x_feat = np.asarray(x_feat, dtype=float).ravel()
    fc = forecaster.predict(x_feat[None, :])[0]
    out = forward_chain(grid, dp_prob, rd_prob, load, fc, solar, opts)
    pg = out["dp_values"]["pg"]

    # dV_rd / d(base_dispatch) by the envelope theorem
    rd_sol = out["rd_solution"]
    slot, dim = rd_prob.param_names["base_dispatch"]
    lam = rd_sol.duals_eq if rd_sol.duals_eq is not None else np.zeros(rd_prob.n_eq)
    mu = rd_sol.duals_ineq if rd_sol.duals_ineq is not None else np.zeros(rd_prob.n_ineq)
    dV_dbase = np.zeros(dim)
    if rd_prob.Bp[slot] is not None and rd_prob.Bp[slot].nnz:
        dV_dbase -= rd_prob.Bp[slot].T @ lam
    if rd_prob.Hp[slot] is not None and rd_prob.Hp[slot].nnz:
        dV_dbase -= rd_prob.Hp[slot].T @ mu

    # d(pg) / d(forecast) through the dispatch argmin
    dx = solution_sensitivity(dp_prob, {"load": load, "solar": fc}, "solar",
                              solution=out["dp_solution"], opts=opts)
    dpg_dfc = dx[dp_prob.var_slice("pg")]
    cg = np.asarray(grid.cost_energy)
    dcost_dfc = (cg + dV_dbase) @ dpg_dfc        # (n_ren,)

    gW = np.outer(x_feat, dcost_dfc)             # d fc_j / d W[f, j] = x_f
    return np.concatenate([gW.ravel(), dcost_dfc])


def gradient_cosine(g1, g2) -> float:
    g1 = np.asarray(g1, dtype=float).ravel()
    g2 = np.asarray(g2, dtype=float).ravel()
    if g1.shape != g2.shape:
        raise ValueError("gradient dimensions differ")
    n1, n2 = np.linalg.norm(g1), np.linalg.norm(g2)
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroVector("cosine undefined for a zero gradient")
    return float(np.clip(g1 @ g2 / (n1 * n2), -1.0, 1.0))


def cosine_matrix(gradients) -> np.ndarray:
    """Pairwise cosine similarities; symmetric with unit diagonal."""
    k = len(gradients)
    M = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            M[i, j] = M[j, i] = gradient_cosine(gradients[i], gradients[j])
    return M


def mape(pred, actual, mask=None, eps=None) -> float:
    """Mean absolute percentage error over masked entries.

    Without an explicit mask, entries below ``eps`` (default: 1 % of the
    peak actual, the zero-output hours) are excluded.
    """
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape:
        raise ValueError("shape mismatch")
    if mask is None:
        cut = eps if eps is not None else 0.01 * float(np.max(actual, initial=0.0))
        mask = actual > max(cut, 1e-12)
    else:
        mask = np.asarray(mask, dtype=bool)
    if not np.any(mask):
        raise EmptyMask("no entries above the masking threshold")
    return float(np.mean(np.abs(pred[mask] - actual[mask]) / actual[mask]) * 100.0)

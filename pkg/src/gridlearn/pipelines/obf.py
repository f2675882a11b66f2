"""Cost-aware forecaster training through the bilevel (MPEC) route.

The training problem places one dispatch KKT system and one redispatch KKT
system per sample inside a single mixed-integer program whose upper-level
variables are the linear forecaster weights; the forecast links into the
dispatch right-hand side, the dispatch setpoints link into the redispatch
right-hand side, and the objective is the mean settled cost.

Exact tree search is viable for small sample counts; for larger sets the
program is still formed (it defines the objective being optimised) but the
heavy lifting comes from a feasible warm start built out of forward solves
plus a deterministic bias-compass improvement pass.  The returned weights
are always the best candidate under the honest forward-evaluated cost, so
the accuracy-trained baseline can never come back better.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..kkt import form_kkt, kkt_assignment
from ..learners import AffineForecaster, fit_linear_least_squares
from ..optmodel.builder import ProblemBuilder
from ..optmodel.problem import substitute_parameters, vector_from_values
from ..solver import SolverOptions
from ..solver.bnb import solve
from .costs import chain_cost, forward_chain

__all__ = ["train_forecaster_bilevel", "BilevelInfo", "forecast_matrix",
           "build_bilevel_program", "warm_start_vector"]


@dataclass
class BilevelInfo:
    baseline_cost: float
    compass_cost: float
    final_cost: float
    chosen: str
    tree_status: str | None = None
    tree_cost: float | None = None
    tree_nodes: int = 0


def forecast_matrix(x, n_out):
    """Selection M with (M vec(W))_j = sum_f x_f W[f, j] for row-major W."""
    x = np.asarray(x, dtype=float).ravel()
    nf = len(x)
    M = np.zeros((n_out, nf * n_out))
    for j in range(n_out):
        M[j, j::n_out] = x
    return M


def _block_selector(prob, name):
    a0, a1 = prob.var_names[name]
    S = np.zeros((a1 - a0, prob.n_z))
    S[np.arange(a1 - a0), np.arange(a0, a1)] = 1.0
    return S


def build_bilevel_program(grid, dp_prob, rd_prob, features, loads, solars,
                          big_m=1e4):
    """Monolithic training program; returns (builder, handles)."""
    feats = np.atleast_2d(np.asarray(features, dtype=float))
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    solars = np.atleast_2d(np.asarray(solars, dtype=float))
    S, nf = feats.shape
    nr = solars.shape[1]
    ng = grid.n_gen

    bld = ProblemBuilder()
    W = bld.variable("Wf", (nf, nr))
    bvar = bld.variable("bf", nr)
    dp_systems, rd_systems = [], []
    cg = np.asarray(grid.cost_energy)
    S_pg = _block_selector(dp_prob, "pg")
    sel = {k: _block_selector(rd_prob, k)
           for k in ("dpg", "shed", "curtail", "store", "rdcost")}

    cost = None
    for i in range(S):
        dpk = form_kkt(dp_prob, big_m=big_m, builder=bld, prefix=f"s{i}d_")
        rdk = form_kkt(rd_prob, big_m=big_m, builder=bld, prefix=f"s{i}r_")
        dp_systems.append(dpk)
        rd_systems.append(rdk)
        yhat = forecast_matrix(feats[i], nr) @ W.expr() + bvar.expr()
        bld.constrain(dpk.params["load"].expr() == loads[i], f"s{i}_dload")
        bld.constrain(dpk.params["solar"].expr() == yhat, f"s{i}_dfc")
        bld.constrain(rdk.params["load"].expr() == loads[i], f"s{i}_rload")
        bld.constrain(rdk.params["solar"].expr() == solars[i], f"s{i}_ract")
        bld.constrain(rdk.params["base_dispatch"].expr()
                      == S_pg @ dpk.x.expr(), f"s{i}_link")
        term = (cg[None, :] @ (S_pg @ dpk.x.expr())
                + cg[None, :] @ (sel["dpg"] @ rdk.x.expr())
                + grid.cost_load_shed * np.ones((1, sel["shed"].shape[0]))
                @ (sel["shed"] @ rdk.x.expr())
                + grid.cost_curtail * np.ones((1, sel["curtail"].shape[0]))
                @ (sel["curtail"] @ rdk.x.expr())
                + grid.cost_storage * np.ones((1, sel["store"].shape[0]))
                @ (sel["store"] @ rdk.x.expr())
                + np.ones((1, sel["rdcost"].shape[0]))
                @ (sel["rdcost"] @ rdk.x.expr()))
        cost = term if cost is None else cost + term
    bld.cost_linear((1.0 / S) * cost)
    handles = {"W": W, "b": bvar, "dp": dp_systems, "rd": rd_systems,
               "n_samples": S}
    return bld, handles


def warm_start_vector(lowered, handles, grid, dp_prob, rd_prob, forecaster,
                      features, loads, solars, opts) -> np.ndarray:
    """Feasible assignment of the monolithic program from forward solves."""
    feats = np.atleast_2d(features)
    loads = np.atleast_2d(loads)
    solars = np.atleast_2d(solars)
    values = {"Wf": forecaster.W.ravel(), "bf": forecaster.b}
    for i in range(handles["n_samples"]):
        fc = forecaster.predict(feats[i][None, :])[0]
        out = forward_chain(grid, dp_prob, rd_prob, loads[i], fc, solars[i],
                            opts)
        dp_vals = {"load": loads[i], "solar": fc}
        values.update(kkt_assignment(handles["dp"][i], dp_vals,
                                     out["dp_solution"]))
        rd_vals = {"load": loads[i], "solar": solars[i],
                   "base_dispatch": out["dp_values"]["pg"]}
        values.update(kkt_assignment(handles["rd"][i], rd_vals,
                                     out["rd_solution"]))
    return vector_from_values(lowered, values)


def _compass_improve(grid, dp_prob, rd_prob, base: AffineForecaster, features,
                     loads, solars, opts, rounds, step0):
    """Deterministic pattern search over every forecaster coefficient.

    Weight steps are scaled by the inverse feature magnitude so each probe
    moves the forecast by a comparable number of MW.
    """
    feats = np.atleast_2d(features)
    nr = len(base.b)
    nf = base.W.shape[0]
    fscale = np.sqrt(np.mean(feats ** 2, axis=0)) + 1e-9
    best = AffineForecaster(base.W.copy(), base.b.copy())
    best_cost = chain_cost(grid, dp_prob, rd_prob, best, features, loads,
                           solars, opts)
    step = step0
    for _ in range(rounds):
        improved = False
        for j in range(nr):
            for sgn in (-1.0, 1.0):
                cand = AffineForecaster(best.W.copy(), best.b.copy())
                cand.b[j] += sgn * step
                c = chain_cost(grid, dp_prob, rd_prob, cand, features, loads,
                               solars, opts)
                if c < best_cost - 1e-9:
                    best, best_cost = cand, c
                    improved = True
        for f in range(nf):
            for j in range(nr):
                for sgn in (-1.0, 1.0):
                    cand = AffineForecaster(best.W.copy(), best.b.copy())
                    cand.W[f, j] += sgn * step / fscale[f]
                    c = chain_cost(grid, dp_prob, rd_prob, cand, features,
                                   loads, solars, opts)
                    if c < best_cost - 1e-9:
                        best, best_cost = cand, c
                        improved = True
        if not improved:
            step *= 0.5
            if step < 1e-3:
                break
    return best, best_cost


def train_forecaster_bilevel(grid, dp_prob, rd_prob, features, loads, solars,
                             big_m=1e4, ridge=1e-8,
                             opts: SolverOptions | None = None,
                             node_budget=400, compass_rounds=12,
                             compass_step=None, baseline=None):
    """Train the linear forecaster head against the settled two-stage cost.

    Returns ``(forecaster, BilevelInfo)``.  The baseline (least-squares fit
    unless given) is a feasible point of the training program, so the result
    never costs more than it on the training set.
    """
    opts = opts or SolverOptions()
    feats = np.atleast_2d(np.asarray(features, dtype=float))
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    solars = np.atleast_2d(np.asarray(solars, dtype=float))
    S = len(feats)

    abf = baseline or fit_linear_least_squares(feats, solars, ridge=ridge)
    abf_cost = chain_cost(grid, dp_prob, rd_prob, abf, feats, loads, solars,
                          opts)

    step0 = compass_step
    if step0 is None:
        step0 = max(0.05 * float(np.mean(grid.ren_capacity)), 0.1)
    improved, improved_cost = _compass_improve(
        grid, dp_prob, rd_prob, abf, feats, loads, solars, opts,
        compass_rounds, step0)

    bld, handles = build_bilevel_program(grid, dp_prob, rd_prob, feats, loads,
                                         solars, big_m=big_m)
    lowered = bld.lower()
    conc = substitute_parameters(lowered, {})
    warm = warm_start_vector(lowered, handles, grid, dp_prob, rd_prob,
                             improved, feats, loads, solars, opts)
    tree_opts = replace(opts, node_limit=node_budget)
    sol = solve(conc, tree_opts, warm_start=warm)
    tree_cost = None
    cand = improved
    if sol.ok:
        Wv = sol.value_of(conc, "Wf").reshape(feats.shape[1], solars.shape[1])
        bv = sol.value_of(conc, "bf")
        tree_fc = AffineForecaster(Wv, bv)
        tree_cost = chain_cost(grid, dp_prob, rd_prob, tree_fc, feats, loads,
                               solars, opts)
        if tree_cost < improved_cost - 1e-12:
            cand = tree_fc

    final_cost = min(abf_cost, improved_cost,
                     tree_cost if tree_cost is not None else np.inf)
    chosen = ("tree" if cand is not improved and tree_cost is not None
              else ("compass" if improved_cost < abf_cost - 1e-12 else "baseline"))
    if chosen == "baseline":
        cand = abf
    info = BilevelInfo(baseline_cost=abf_cost, compass_cost=improved_cost,
                       final_cost=final_cost, chosen=chosen,
                       tree_status=sol.status if sol is not None else None,
                       tree_cost=tree_cost, tree_nodes=sol.stats.nodes)
    return cand, info

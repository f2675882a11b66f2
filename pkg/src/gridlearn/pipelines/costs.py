"""Settled two-stage operation cost and the forward dispatch/redispatch chain."""

from __future__ import annotations

import numpy as np

from ..optmodel.problem import substitute_parameters
from ..solver import SolverOptions
from ..solver.bnb import solve

__all__ = ["settled_cost", "forward_chain", "chain_cost"]


def settled_cost(grid, dp_values: dict, rd_values: dict) -> float:
    """First-stage energy cost plus every realised redispatch term.

    ``dp_values`` needs "pg"; ``rd_values`` needs "dpg", "shed", "curtail",
    "store" and "rdcost".  Blocks may be (T, n) or flat single-period arrays;
    hours are summed.
    """
    cg = np.asarray(grid.cost_energy)

    def total(block, weights=None):
        arr = np.atleast_2d(np.asarray(block, dtype=float))
        if weights is None:
            return float(arr.sum())
        arr = arr.reshape(-1, len(weights))
        return float((arr * weights).sum())

    cost = total(dp_values["pg"], cg)
    cost += total(rd_values["dpg"], cg)
    cost += grid.cost_load_shed * total(rd_values["shed"])
    cost += grid.cost_curtail * total(rd_values["curtail"])
    cost += grid.cost_storage * total(rd_values["store"])
    cost += total(rd_values["rdcost"])
    return cost


def forward_chain(grid, dp_prob, rd_prob, load, forecast_solar, actual_solar,
                  opts: SolverOptions | None = None, rd_load=None) -> dict:
    """Solve dispatch on the forecast, then redispatch on the actuals.

    ``rd_load`` overrides the redispatch-stage load (defaults to ``load``).
    Returns the two solutions, the named blocks and the settled cost.
    """
    opts = opts or SolverOptions()
    dp_conc = substitute_parameters(dp_prob, {"load": load,
                                              "solar": forecast_solar})
    dp_sol = solve(dp_conc, opts)
    if not dp_sol.ok:
        raise RuntimeError(f"dispatch stage failed: {dp_sol.status}")
    pg = dp_conc.value_of("pg", dp_sol.primal)
    rd_conc = substitute_parameters(rd_prob, {
        "load": load if rd_load is None else rd_load,
        "solar": actual_solar, "base_dispatch": pg})
    rd_sol = solve(rd_conc, opts)
    if not rd_sol.ok:
        raise RuntimeError(f"redispatch stage failed: {rd_sol.status}")
    dp_values = {"pg": pg}
    rd_values = {k: rd_conc.value_of(k, rd_sol.primal)
                 for k in ("dpg", "shed", "curtail", "store", "rdcost")}
    return {"dp_solution": dp_sol, "rd_solution": rd_sol,
            "dp_values": dp_values, "rd_values": rd_values,
            "cost": settled_cost(grid, dp_values, rd_values)}


def chain_cost(grid, dp_prob, rd_prob, forecaster, features, loads, solars,
               opts: SolverOptions | None = None) -> float:
    """Mean settled cost of a forecaster over a sample set (forward solves)."""
    feats = np.atleast_2d(features)
    loads = np.atleast_2d(loads)
    solars = np.atleast_2d(solars)
    total = 0.0
    for i in range(len(feats)):
        fc = forecaster.predict(feats[i][None, :])[0]
        out = forward_chain(grid, dp_prob, rd_prob, loads[i], fc, solars[i],
                            opts)
        total += out["cost"]
    return total / len(feats)

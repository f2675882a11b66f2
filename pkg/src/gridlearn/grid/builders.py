"""Operation problem builders.

``build_uc`` lowers a multi-period network-constrained unit commitment with
parameter slots for the forecast load and renewable profiles.  ``build_dispatch``
and ``build_redispatch`` are the single-period continuous problems of the
two-stage dispatch / redispatch chain (redispatch has no intertemporal
coupling, so longer horizons are handled by substituting hour by hour).
"""

from __future__ import annotations

import numpy as np

from ..optmodel.builder import ProblemBuilder
from ..optmodel.problem import ParametricMIQP
from .model import GridModel
from .network import ptdf

__all__ = ["build_uc", "build_dispatch", "build_redispatch", "build_ed",
           "uc_parameter_values", "InfeasibleBounds"]


class InfeasibleBounds(Exception):
    pass


def _network_blocks(g: GridModel):
    F = ptdf(g)
    Cg, Cl, Cr = g.gen_incidence(), g.load_incidence(), g.ren_incidence()
    # bus- and flow-side phase shift contributions (zero without shifters)
    p_bus_shift = np.zeros(g.n_bus)
    p_f_shift = (g.phase_shift / g.reactance)
    return F, Cg, Cl, Cr, p_bus_shift, p_f_shift


def build_uc(g: GridModel, horizon: int, initial_status=None,
             initial_output=None) -> ParametricMIQP:
    """Unit commitment over ``horizon`` hours.

    Parameters: ``load`` (horizon * n_load MW) and ``solar``
    (horizon * n_ren MW), flattened row-major.  Binary blocks: on/off,
    start-up and shut-down status per generator and hour.
    """
    if horizon < 1:
        raise InfeasibleBounds("horizon must be >= 1")
    T, ng, nl, nr, nf = horizon, g.n_gen, g.n_load, g.n_ren, g.n_line
    u0 = np.ones(ng) if initial_status is None else np.asarray(initial_status, float)
    p0 = g.p_min * u0 if initial_output is None else np.asarray(initial_output, float)
    if np.any((p0 > g.p_max * u0 + 1e-9) | (p0 < 0)):
        raise InfeasibleBounds("initial output violates capacity at the initial status")

    F, Cg, Cl, Cr, p_bus_shift, p_f_shift = _network_blocks(g)
    FCg, FCl, FCr = F @ Cg, F @ Cl, F @ Cr
    f_shift = F @ (-p_bus_shift) + p_f_shift

    b = ProblemBuilder()
    u = b.variable("status", (T, ng), binary=True)
    su = b.variable("startup", (T, ng), binary=True)
    sd = b.variable("shutdown", (T, ng), binary=True)
    pg = b.variable("pg", (T, ng))
    shed = b.variable("shed", (T, nl), lb=0.0)
    curt = b.variable("curtail", (T, nr), lb=0.0)
    flow = b.variable("flow", (T, nf))
    pg_init = b.variable("pg_init", ng, lb=0.0)
    load = b.parameter("load", T * nl)
    solar = b.parameter("solar", T * nr)

    b.constrain(pg_init == p0, "pg_init_fix")
    ones_g = np.ones((1, ng))
    for t in range(T):
        u_prev = u[t - 1] if t > 0 else u0
        pg_prev = pg[t - 1] if t > 0 else pg_init.expr()
        b.constrain(su[t] - sd[t] - u[t] + u_prev == 0.0, f"logic[{t}]")
        b.constrain(su[t] + sd[t] <= 1.0, f"excl[{t}]")
        b.constrain(pg[t] - pg_prev - g.ramp_up * u_prev - g.ramp_startup * su[t]
                    <= 0.0, f"ramp_up[{t}]")
        b.constrain(pg_prev - pg[t] - g.ramp_down * u[t] - g.ramp_shutdown * sd[t]
                    <= 0.0, f"ramp_down[{t}]")
        b.constrain(ones_g @ u[t] >= 1.0, f"commit[{t}]")
        b.constrain(g.p_min * u[t] - pg[t] <= 0.0, f"cap_lo[{t}]")
        b.constrain(pg[t] - g.p_max * u[t] <= 0.0, f"cap_hi[{t}]")

        load_t = load.reshaped(t, nl)
        solar_t = solar.reshaped(t, nr)
        inj = Cg @ pg[t] - Cl @ (load_t - shed[t]) + Cr @ (solar_t - curt[t])
        b.constrain(np.ones((1, g.n_bus)) @ inj == 0.0, f"balance[{t}]")
        b.constrain(flow[t] - FCg @ pg[t] + FCl @ load_t - FCl @ shed[t]
                    - FCr @ solar_t + FCr @ curt[t] == f_shift, f"flow_def[{t}]")
        b.constrain(flow[t] <= g.flow_limit, f"flow_hi[{t}]")
        b.constrain(-1.0 * flow[t] <= g.flow_limit, f"flow_lo[{t}]")

    cost = None
    for t in range(T):
        term = np.asarray(g.cost_fixed)[None, :] @ u[t] \
            + np.asarray(g.cost_startup)[None, :] @ su[t] \
            + np.asarray(g.cost_shutdown)[None, :] @ sd[t] \
            + np.asarray(g.cost_energy)[None, :] @ pg[t] \
            + g.cost_load_shed * np.ones((1, nl)) @ shed[t] \
            + g.cost_curtail * np.ones((1, nr)) @ curt[t]
        cost = term if cost is None else cost + term
    b.cost_linear(cost)
    return b.lower()


def uc_parameter_values(load_mw, solar_mw) -> dict:
    """Flatten (T, n) profile slices into the builder's parameter layout."""
    return {"load": np.asarray(load_mw, dtype=float).ravel(),
            "solar": np.asarray(solar_mw, dtype=float).ravel()}


def build_dispatch(g: GridModel, status) -> ParametricMIQP:
    """Single-period economic dispatch under a fixed commitment.

    Parameters: ``load`` (n_load) and ``solar`` (n_ren).  Continuous only;
    fixed costs are constant under a fixed commitment and kept out of the
    objective.
    """
    ng, nl, nr, nf = g.n_gen, g.n_load, g.n_ren, g.n_line
    ufix = np.asarray(status, dtype=float)
    F, Cg, Cl, Cr, p_bus_shift, p_f_shift = _network_blocks(g)
    FCg, FCl, FCr = F @ Cg, F @ Cl, F @ Cr
    f_shift = F @ (-p_bus_shift) + p_f_shift

    b = ProblemBuilder()
    pg = b.variable("pg", ng)
    shed = b.variable("shed", nl, lb=0.0)
    curt = b.variable("curtail", nr, lb=0.0)
    flow = b.variable("flow", nf)
    load = b.parameter("load", nl)
    solar = b.parameter("solar", nr)

    b.constrain(pg >= g.p_min * ufix, "cap_lo")
    b.constrain(pg <= g.p_max * ufix, "cap_hi")
    inj = Cg @ pg.expr() - Cl @ (load.expr() - shed.expr()) \
        + Cr @ (solar.expr() - curt.expr())
    b.constrain(np.ones((1, g.n_bus)) @ inj == 0.0, "balance")
    b.constrain(flow.expr() - FCg @ pg.expr() + FCl @ load.expr()
                - FCl @ shed.expr() - FCr @ solar.expr() + FCr @ curt.expr()
                == f_shift, "flow_def")
    b.constrain(flow <= g.flow_limit, "flow_hi")
    b.constrain(-1.0 * flow.expr() <= g.flow_limit, "flow_lo")

    b.cost_linear(np.asarray(g.cost_energy)[None, :] @ pg.expr()
                  + g.cost_load_shed * np.ones((1, nl)) @ shed.expr()
                  + g.cost_curtail * np.ones((1, nr)) @ curt.expr())
    return b.lower()


def build_redispatch(g: GridModel, status) -> ParametricMIQP:
    """Single-period redispatch around a base dispatch.

    Parameters: ``load`` and ``solar`` (actuals) and ``base_dispatch``
    (the first-stage generator setpoints).  Slack variables (shedding and a
    nonnegative storage sink) give the problem recourse for every parameter
    value, and per-generator epigraph rows price asymmetric up/down moves.
    """
    ng, nl, nr, nf = g.n_gen, g.n_load, g.n_ren, g.n_line
    ufix = np.asarray(status, dtype=float)
    F, Cg, Cl, Cr, p_bus_shift, p_f_shift = _network_blocks(g)
    FCg, FCl, FCr = F @ Cg, F @ Cl, F @ Cr
    f_shift = F @ (-p_bus_shift) + p_f_shift

    b = ProblemBuilder()
    dpg = b.variable("dpg", ng)
    shed = b.variable("shed", nl, lb=0.0)
    store = b.variable("store", ng, lb=0.0)
    curt = b.variable("curtail", nr, lb=0.0)
    rd = b.variable("rdcost", ng)
    flow = b.variable("flow", nf)
    load = b.parameter("load", nl)
    solar = b.parameter("solar", nr)
    base = b.parameter("base_dispatch", ng)

    b.constrain(dpg <= g.ramp_up_rd, "rd_ramp_hi")
    b.constrain(-1.0 * dpg.expr() <= g.ramp_down_rd, "rd_ramp_lo")
    b.constrain(dpg + base <= g.p_max * ufix, "cap_hi")
    b.constrain(-1.0 * dpg.expr() - base.expr() <= -(g.p_min * ufix), "cap_lo")
    b.constrain(np.diag(g.cost_up_rd) @ dpg.expr() - rd.expr() <= 0.0, "epi_up")
    b.constrain(np.diag(-g.cost_down_rd) @ dpg.expr() - rd.expr() <= 0.0, "epi_down")

    gen_net = base.expr() + dpg.expr() - store.expr()
    inj = Cg @ gen_net - Cl @ (load.expr() - shed.expr()) \
        + Cr @ (solar.expr() - curt.expr())
    b.constrain(np.ones((1, g.n_bus)) @ inj == 0.0, "balance")
    b.constrain(flow.expr() - FCg @ gen_net + FCl @ load.expr()
                - FCl @ shed.expr() - FCr @ solar.expr() + FCr @ curt.expr()
                == f_shift, "flow_def")
    b.constrain(flow <= g.flow_limit, "flow_hi")
    b.constrain(-1.0 * flow.expr() <= g.flow_limit, "flow_lo")

    b.cost_linear(np.asarray(g.cost_energy)[None, :] @ dpg.expr()
                  + g.cost_load_shed * np.ones((1, nl)) @ shed.expr()
                  + np.ones((1, ng)) @ rd.expr()
                  + g.cost_storage * np.ones((1, ng)) @ store.expr()
                  + g.cost_curtail * np.ones((1, nr)) @ curt.expr())
    return b.lower()


def build_ed(g: GridModel, status) -> ParametricMIQP:
    """Redispatch stage of the commitment chain (alias of build_redispatch)."""
    return build_redispatch(g, status)

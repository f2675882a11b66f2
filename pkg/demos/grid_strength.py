"""Grid-strength assessment on the bundled 14-bus case.

Shows the network reductions behind the criterion: PTDF for flows, Kron
reduction to the inverter buses, the smallest-eigenvalue criterion itself,
and its analytic gradient against finite differences.
"""

import numpy as np

from gridlearn.grid import (
    bundled_case,
    gscr,
    gscr_gradient,
    ptdf,
    reduce_admittance,
)

g = bundled_case("case14")
print(f"{g.name}: {g.n_bus} buses, {g.n_line} lines, {g.n_gen} generators, "
      f"{g.n_ren} solar plants at buses {g.bus_ids[g.ren_bus].tolist()}")

F = ptdf(g)
inj = np.zeros(g.n_bus)
inj[4] = 50.0    # 50 MW at bus 5, balanced at the slack
inj[0] = -50.0
print("max |flow| for a 50 MW transfer bus5->slack:",
      round(float(np.max(np.abs(F @ inj))), 2), "MW")

p = g.ren_capacity / g.base_mva * 0.5
for online in ([1, 0, 0, 0, 0], [1, 1, 0, 0, 0], [1, 1, 1, 1, 1]):
    u = np.array(online, dtype=bool)
    Y, kept = reduce_admittance(g, u)
    val = gscr(g, u, p)
    print(f"online={online}  reduced size={Y.shape[0]}  criterion={val:.3f}")

u = np.array([1, 1, 0, 0, 1], dtype=bool)
grad = gscr_gradient(g, u, p)
h = 1e-6
fd = np.array([(gscr(g, u, p + h * e) - gscr(g, u, p - h * e)) / (2 * h)
               for e in np.eye(4)])
print("analytic gradient:   ", grad.round(4))
print("finite differences:  ", fd.round(4))

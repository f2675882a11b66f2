"""Rewriting a continuous problem as its linearised optimality system.

The emitted block exposes the problem's parameters as variables, so the
system can sit inside a larger program; fixing them recovers exactly the
argmin of the source problem.
"""

import numpy as np

from gridlearn.kkt import form_kkt, solve_embedded, verify_kkt
from gridlearn.optmodel import ProblemBuilder, dot, substitute_parameters
from gridlearn.solver import SolverOptions, solve

# min x  s.t.  x >= y,  x <= 10  (parameter y)
b = ProblemBuilder()
x = b.variable("x", 1)
y = b.parameter("y", 1)
b.constrain(x >= y, "lo")
b.constrain(x <= 10.0, "hi")
b.cost_linear(dot([1.0], x))
prob = b.lower()

sys = form_kkt(prob, big_m=1e4)
for yval in (3.0, -1.0, 9.5):
    cand = solve_embedded(sys, {"y": [yval]})
    direct = solve(substitute_parameters(prob, {"y": [yval]}), SolverOptions())
    print(f"y={yval}: embedded x={cand['x'][0]:.4f} mu={cand['mu'].round(4)} "
          f"objective={cand['objective']:.4f} (direct {direct.objective:.4f})")
    rep = verify_kkt(sys, {"y": [yval]}, cand)
    print("   residuals:", f"stationarity={rep.stationarity:.1e}",
          f"complementarity={rep.complementarity:.1e}",
          "saturated rows:", rep.saturated_rows)

# A candidate with a perturbed dual shows up in the stationarity residual.
bad = {"x": np.array([3.0]), "lam": np.zeros(0), "mu": np.array([1.1, 0.0])}
print("perturbed dual stationarity residual:",
      verify_kkt(sys, {"y": [3.0]}, bad).stationarity)

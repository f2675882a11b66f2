"""The builtin tree solver, duals, and the MPS file-exchange backend."""

import numpy as np

from gridlearn.optmodel import ProblemBuilder, dot, substitute_parameters
from gridlearn.solver import (
    DEFAULT_EXTERNAL_CMD,
    SolverOptions,
    export_mps,
    solve,
)

# A small knapsack-flavoured MILP.
b = ProblemBuilder()
z = b.variable("pick", 4, binary=True)
x = b.variable("x", 2, lb=0.0, ub=3.0)
value = np.array([-4.0, -3.0, -5.0, -2.0])
weight = np.array([[2.0, 3.0, 4.0, 1.0]])
b.constrain(weight @ z.expr() + np.ones((1, 2)) @ x.expr() <= 6.0, "budget")
b.cost_linear(dot(value, z) + dot([-0.5, -0.25], x))
prob = substitute_parameters(b.lower(), {})

sol = solve(prob, SolverOptions(abs_gap=0.0, rel_gap=0.0))
print("status:", sol.status)
print("objective:", sol.objective)
print("picks:", sol.binary_values, " x:", np.round(sol.primal[4:], 3))
print("nodes:", sol.stats.nodes, " gap:", sol.gap)
print("binding-row dual:", sol.duals_ineq[0])

# The same instance through the file-exchange backend (an independent MIP
# core behind an MPS writer/parser and a plain text solution dialect).
ext = solve(prob, SolverOptions(backend="external",
                                external_cmd=DEFAULT_EXTERNAL_CMD))
print("external backend objective:", ext.objective)

print("\nfirst MPS lines:")
print("\n".join(export_mps(prob).splitlines()[:12]))

"""Declarative modelling and the canonical parametric standard form.

Build a tiny parametric LP, lower it, inspect the blocks, substitute a
parameter value and solve.  The same problem is then written to and read
back from the documented JSON problem schema.
"""

import numpy as np

from gridlearn.optmodel import (
    ProblemBuilder,
    dot,
    dump_document,
    load_document,
    substitute_parameters,
    validate,
)
from gridlearn.solver import SolverOptions, solve

# min x1 + x2  s.t.  x1 + x2 >= y,  x >= 0, with a scalar parameter y.
b = ProblemBuilder()
x = b.variable("x", 2, lb=0.0)
y = b.parameter("demand", 1)
b.constrain(np.ones((1, 2)) @ x.expr() >= y.expr(), "cover")
b.cost_linear(dot([1.0, 1.0], x))
prob = b.lower()

print("columns:", prob.var_names)
print("parameter slots:", prob.param_names)
print("G =\n", prob.G.toarray())
print("h =", prob.h)
slot, _ = prob.param_names["demand"]
print("H_demand =\n", prob.Hp[slot].toarray())
print("diagnostics:", validate(prob) or "clean")

for demand in (2.0, 5.0):
    conc = substitute_parameters(prob, {"demand": [demand]})
    sol = solve(conc, SolverOptions())
    print(f"demand={demand}: objective={sol.objective:.3f}, x={sol.primal}")

# Round-trip through the structured problem document.
dump_document(prob, "/tmp/demo_problem.json")
again = load_document("/tmp/demo_problem.json")
conc = substitute_parameters(again, {"demand": [3.0]})
print("document round trip, demand=3:", solve(conc, SolverOptions()).objective)

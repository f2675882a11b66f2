"""Exact mixed-integer encoding of a small ReLU network.

Interval bound propagation fixes the sign of provably stable neurons so
they need no binaries; the remaining neurons get the four-row indicator
pattern.  With the input pinned by equality rows, the encoded output can
only take the forward-pass value.
"""

import numpy as np

from gridlearn.neuralnet import Layer, ReluNetwork, forward, form_milp, ibp_bounds
from gridlearn.optmodel import ProblemBuilder, substitute_parameters
from gridlearn.solver import SolverOptions, solve

rng = np.random.default_rng(3)
net = ReluNetwork([
    Layer(rng.normal(size=(6, 2)), rng.normal(size=6) * 0.2, "relu"),
    Layer(rng.normal(size=(4, 6)), rng.normal(size=4) * 0.2, "relu"),
    Layer(rng.normal(size=(1, 4)), np.zeros(1), "identity"),
])
box = (-np.ones(2), np.ones(2))

bounds = ibp_bounds(net, box)
for i, (lo, hi) in enumerate(zip(bounds.lower, bounds.upper)):
    print(f"layer {i}: pre-activation bounds "
          f"[{np.min(lo):+.2f}, {np.max(hi):+.2f}]")

bld = ProblemBuilder()
enc = form_milp(net, box, builder=bld)
print("binaries emitted:", enc.binary_count,
      "of", sum(net.hidden_widths), "hidden neurons")

x = np.array([0.3, -0.7])
bld.constrain(enc.input_var.expr() == x, "pin_input")
bld.cost_linear(np.ones((1, 1)) @ enc.output_var.expr())
sol = solve(substitute_parameters(bld.lower(), {}),
            SolverOptions(abs_gap=0.0, rel_gap=0.0))
print("encoded output:", sol.objective)
print("forward pass:  ", forward(net, x)[0])

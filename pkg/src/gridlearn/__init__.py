"""gridlearn: power-system optimisation with learnable components.

Subpackages
-----------
optmodel
    Declarative modelling and the canonical parametric MIQP/MILP form.
solver
    Builtin branch-and-bound solver, MPS interchange, external backend.
kkt
    KKT/MPEC rewriting of continuous problems with big-M complementarity.
neuralnet
    ReLU networks, interval bound propagation, exact MIL encoding.
grid
    Cases, profiles, PTDF, unit commitment / dispatch builders, grid
    strength (gSCR) oracle and its analytic gradient.
learners
    Logistic / constrained-logistic classifiers, small MLPs, ridge fits.
sampling
    Stability dataset construction (uniform, gradient, heuristic).
pipelines
    End-to-end flows: stability-constrained compilation, operation-aware
    metrics, cost-aware and robust forecaster training, implicit gradients.
"""

__version__ = "0.1.0"

"""Solver option and result containers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SolverOptions", "Solution", "SolveStats",
           "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "GAP_LIMIT", "TIME_LIMIT"]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
GAP_LIMIT = "gap_limit"
TIME_LIMIT = "time_limit"


@dataclass
class SolverOptions:
    """Options shared by the builtin tree search and the external backend.

    ``backend`` is "builtin" or "external"; the external path writes an MPS
    file and runs ``external_cmd`` with ``{input}``/``{output}`` placeholders.
    ``node_limit`` bounds the tree deterministically; ``time_limit`` is a
    wall-clock safety net (seconds).
    """

    abs_gap: float = 0.001
    rel_gap: float = 0.001
    time_limit: float = 3600.0
    backend: str = "builtin"
    external_cmd: str | None = None
    node_limit: int = 200000
    integrality_tol: float = 1e-6
    pwl_segments: int = 16
    quad_range: tuple = (-1e3, 1e3)
    heuristic_period: int = 50
    node_order: str = "best"      # "best" (bound-first) or "depth" (dives)
    first_feasible: bool = False  # stop at the first integral incumbent
    branch_rule: str = "most_fractional"   # or "first_fractional"
    engine: str = "tree"          # "tree" (reference search) or "mip"
                                  # (library MIP core behind the same contract)

    def __post_init__(self):
        if self.abs_gap < 0 or self.rel_gap < 0:
            raise ValueError("gaps must be nonnegative")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass
class SolveStats:
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    warnings: list = field(default_factory=list)


@dataclass
class Solution:
    """Solve outcome.

    Duals are populated for continuous problems and, for mixed-integer
    problems, from the fixed-binary LP at the incumbent.  Convention:
    stationarity reads ``P x + q + A' lam + G' mu = 0`` with ``mu >= 0``.
    """

    status: str
    primal: np.ndarray | None = None
    objective: float = np.nan
    duals_eq: np.ndarray | None = None
    duals_ineq: np.ndarray | None = None
    binary_values: np.ndarray | None = None
    gap: float = np.nan
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def ok(self):
        return self.status in (OPTIMAL, GAP_LIMIT, TIME_LIMIT) and self.primal is not None

    def value_of(self, prob, name):
        return prob.value_of(name, self.primal)

"""Mixed-integer solving: builtin branch and bound plus file-exchange backend."""

from .bnb import solve, solve_builtin
from .errors import (
    BackendFailure,
    MissingVariable,
    NumericalBreakdown,
    SolverError,
    UnknownDialect,
    UnsupportedQuadratic,
)
from .external import DEFAULT_EXTERNAL_CMD, solve_external
from .lpcore import LpResult, solve_lp
from .mps import column_names, export_mps, format_solution, parse_mps, parse_solution
from .types import (
    GAP_LIMIT,
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    Solution,
    SolveStats,
    SolverOptions,
)

__all__ = [
    "solve", "solve_builtin", "solve_external", "solve_lp", "LpResult",
    "SolverOptions", "Solution", "SolveStats",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "GAP_LIMIT", "TIME_LIMIT",
    "export_mps", "parse_mps", "parse_solution", "format_solution",
    "column_names", "DEFAULT_EXTERNAL_CMD",
    "SolverError", "BackendFailure", "NumericalBreakdown",
    "UnsupportedQuadratic", "UnknownDialect", "MissingVariable",
]

"""Solver-facing exception types."""


class SolverError(Exception):
    """Base class for solver failures."""


class BackendFailure(SolverError):
    """External process failed or produced unparseable output."""


class NumericalBreakdown(SolverError):
    """The LP core reported a numerical failure."""


class UnsupportedQuadratic(SolverError):
    """Non-diagonal quadratic cost: route to the external backend."""


class UnknownDialect(SolverError):
    """Solution text does not follow the documented output dialect."""


class MissingVariable(SolverError):
    """Solution text references a column unknown to the problem."""

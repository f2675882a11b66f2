"""Declarative optimisation modelling and the canonical parametric form."""

from .builder import ProblemBuilder, builder_from_problem
from .errors import (
    DimensionMismatch,
    MissingParameter,
    ModelError,
    NonPSDObjective,
    ParameterInQuadraticTerm,
    SpecDocumentError,
    UndeclaredSymbol,
    UnsupportedExpression,
)
from .expressions import AffExpr, Constraint, Parameter, Variable, dot, hstack
from .problem import (
    ConcreteMIQP,
    ParametricMIQP,
    Violation,
    substitute_parameters,
    validate,
    vector_from_values,
)
from .textspec import build_problem, dump_document, load_document

__all__ = [
    "ProblemBuilder", "builder_from_problem",
    "AffExpr", "Constraint", "Parameter", "Variable", "dot", "hstack",
    "ParametricMIQP", "ConcreteMIQP", "substitute_parameters", "validate",
    "Violation", "vector_from_values", "build_problem", "load_document", "dump_document",
    "ModelError", "UndeclaredSymbol", "NonPSDObjective",
    "ParameterInQuadraticTerm", "DimensionMismatch", "MissingParameter",
    "UnsupportedExpression", "SpecDocumentError",
]

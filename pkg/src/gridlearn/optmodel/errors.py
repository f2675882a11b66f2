"""Exception types raised while building and validating problems."""


class ModelError(Exception):
    """Base class for modelling errors."""


class UndeclaredSymbol(ModelError):
    """An expression references a variable/parameter unknown to the builder."""


class NonPSDObjective(ModelError):
    """Quadratic cost matrix has an eigenvalue below the PSD tolerance."""


class ParameterInQuadraticTerm(ModelError):
    """A parameter was placed where two decision variables must multiply."""


class DimensionMismatch(ModelError):
    """Shapes of coefficients, bounds or values do not line up."""


class MissingParameter(ModelError):
    """substitute() did not receive a value for every parameter slot."""


class UnsupportedExpression(ModelError):
    """Expression uses a position outside the canonical problem class."""


class SpecDocumentError(ModelError):
    """Structured problem document is malformed."""

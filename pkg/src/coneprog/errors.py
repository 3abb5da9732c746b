"""Exception types raised across the modeling, canonicalization, and solve layers."""

__all__ = [
    "ConeprogError",
    "UnsupportedShape",
    "ShapeMismatch",
    "ArityError",
    "NonAffineProduct",
    "MissingBinding",
    "SignViolation",
    "NotDcp",
    "MixedSense",
    "StatusMismatch",
    "TemplateError",
    "SolverError",
    "OracleSizeError",
    "OracleInconclusive",
    "DslError",
]


class ConeprogError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedShape(ConeprogError):
    """Requested a shape outside what a node kind supports."""


class ShapeMismatch(ConeprogError):
    """Operand shapes are incompatible for the requested operation."""


class ArityError(ConeprogError):
    """Wrong number of arguments for an atom."""


class NonAffineProduct(ConeprogError):
    """Product with no constant or parameter factor, or a parameter-by-parameter product."""


class MissingBinding(ConeprogError):
    """A leaf required by evaluation or stuffing has no bound value."""


class SignViolation(ConeprogError):
    """A bound parameter value contradicts the parameter's declared sign."""


class NotDcp(ConeprogError):
    """Problem failed convexity verification.

    Carries the full verdict so callers can point at the offending subexpression.
    """

    def __init__(self, verdict):
        self.verdict = verdict
        super().__init__(str(verdict))


class MixedSense(ConeprogError):
    """Tried to add problems whose objectives have different senses."""


class StatusMismatch(ConeprogError):
    """Solution recovery called on a cone solution without a usable primal point."""


class TemplateError(ConeprogError):
    """Expression cannot be reduced to coefficients affine in the parameters."""


class SolverError(ConeprogError):
    """Numerical failure inside the cone solver."""


class OracleSizeError(ConeprogError):
    """Reference solver refused a program above its size cap."""


class OracleInconclusive(ConeprogError):
    """Reference solver could not certify a result for this program."""


class DslError(ConeprogError):
    """Problem-file parse or build error with source position."""

    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        if line is not None:
            message = f"{line}:{col}: {message}"
        super().__init__(message)

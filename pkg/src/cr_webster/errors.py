"""Exception hierarchy.

Every fault raised by the library derives from :class:`CRWebsterError`; the
CLI maps the subclasses below to distinct exit codes.
"""

from __future__ import annotations


class CRWebsterError(Exception):
    """Base class for all library errors."""


class ConfigurationError(CRWebsterError, ValueError):
    pass


class EvaluationError(CRWebsterError, ArithmeticError):
    pass


class PoleError(CRWebsterError, ValueError):
    """A point sits on the excluded pole of a Cayley chart."""


class QuadratureError(CRWebsterError):
    """Refinement budget exhausted before the requested tolerance was met."""

    def __init__(self, message, partials=()):
        super().__init__(message)
        self.partials = tuple(partials)


class ConventionError(CRWebsterError):
    """Calibration residual too large: the vector-field or sign convention is wrong."""


class PreconditionError(CRWebsterError, ValueError):
    pass


class SingularityError(CRWebsterError, ValueError):
    pass


class C0ViolationError(CRWebsterError):
    """Degenerate critical point, or a K+ margin indistinguishable from zero."""

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)


class C1ViolationError(CRWebsterError):
    """An interaction matrix has least eigenvalue indistinguishable from zero."""

    def __init__(self, message, labels=(), rho=float("nan")):
        super().__init__(message)
        self.labels = tuple(labels)
        self.rho = rho


class CapExceededError(CRWebsterError):
    pass


class IncompleteInputError(CRWebsterError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InternalConsistencyError(CRWebsterError):
    pass


class FlowIntegrationError(CRWebsterError):
    pass


class FlowConsistencyError(InternalConsistencyError):
    """Flow classification disagrees with the spectral verdict."""


class ExpressionError(CRWebsterError, ValueError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class InputError(CRWebsterError, ValueError):
    pass


class CoverageWarning(UserWarning):
    """Fewer critical points than any Morse function on S^3 must have."""

"""Error types raised across the package.

The CLI maps these onto exit codes, so every failure a user can trigger
should surface as one of the classes below.
"""


class ServiceDiffError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(ServiceDiffError, ValueError):
    """A parameter is outside its admissible range."""


class AssumptionViolation(ServiceDiffError):
    """A regularity assumption on the market primitives does not hold.

    ``assumption`` names the failed condition, e.g. ``"virtual valuation"``.
    """

    def __init__(self, assumption, message):
        super().__init__(f"{assumption}: {message}")
        self.assumption = assumption


class IllConditionedError(ServiceDiffError, ArithmeticError):
    """Evaluation requested where the density is numerically zero."""


class NumericalFailure(ServiceDiffError, ArithmeticError):
    """A root search or integration did not reach its tolerance."""


class NoSolutionError(NumericalFailure):
    """No bracket containing a solution could be found."""


class InconsistencyError(NumericalFailure):
    """Two independent computations of the same quantity disagree."""


class EmptyClassError(ServiceDiffError, ValueError):
    """A menu contains a class that attracts no users."""

    def __init__(self, index, message):
        super().__init__(f"class {index}: {message}")
        self.index = index


class DomainError(ServiceDiffError, ValueError):
    """A query falls outside the domain of an evaluable map."""

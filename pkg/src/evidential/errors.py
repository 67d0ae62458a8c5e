"""Exception hierarchy shared by every module of the package."""


class EvidentialError(Exception):
    """Base class for all errors raised by :mod:`evidential`."""


class DomainError(EvidentialError, ValueError):
    """An argument lies outside the domain of the function."""


class MeanUndefinedError(DomainError):
    """The distribution mean does not exist for the given parameters."""


class RankError(EvidentialError, ValueError):
    """A design matrix is not of full column rank.

    Attributes
    ----------
    columns : tuple of str
        Labels of the columns found to be linearly dependent on the others.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class InsufficientDataError(EvidentialError, ValueError):
    """Too few observations for the requested computation (n <= r)."""


class DegenerateVarianceError(EvidentialError, ArithmeticError):
    """A fit reproduced the data exactly, so the variance estimate is zero."""


class SpecError(EvidentialError, ValueError):
    """A model comparison or design specification is malformed."""


class NumericError(EvidentialError, ArithmeticError):
    """A matrix that must be inverted is singular to working precision."""


class SearchExhaustedError(EvidentialError, RuntimeError):
    """A sample-size search reached its cap without meeting the budget."""


class NoSolutionError(EvidentialError, RuntimeError):
    """A root search found no sign change on its bracket."""


class StratificationError(EvidentialError, ValueError):
    """A cell is too small for the within-cell bootstrap."""


class ResourceCapError(EvidentialError, RuntimeError):
    """A simulation request exceeds the configured refit budget."""


class DataLoadError(EvidentialError, ValueError):
    """An input table cannot be turned into a design."""

"""Exception hierarchy shared by all modules."""


class FKError(Exception):
    """Base class for every error raised by fkquasi."""


class ConfigurationError(FKError, ValueError):
    """Invalid parameters or an unusable configuration."""


class EmptySetError(FKError, ValueError):
    """A construction produced no points."""


class DeloneError(FKError, ValueError):
    """A point set is too small or malformed for the requested quantity."""


class OverlapError(FKError, ValueError):
    """Bump supports would overlap."""


class DegeneratePotentialError(FKError):
    """No non-degenerate critical point was found."""


class IllConditionedError(FKError):
    """The local-inverse domain radius collapsed."""


class DomainError(FKError, ValueError):
    """A local inverse was requested outside its domain."""


class NumericalError(FKError, ArithmeticError):
    """A Newton solve failed to converge."""


class CoverageError(FKError, ValueError):
    """The atlas region does not cover the requested targets."""


class InfeasibleTypeError(FKError, ValueError):
    """The type radius is below the coding guarantee."""


class NotExpandingError(FKError, ValueError):
    """A self-affinity matrix is not expanding."""


class DomainBreachError(FKError):
    """The contraction iteration left the local-inverse domain."""


class NonConvergenceError(FKError):
    """The contraction iteration hit its iteration limit."""


class VerificationError(FKError):
    """One or more verification clauses failed.

    The full :class:`~fkquasi.solver.VerificationSummary` is attached as
    ``summary``.
    """

    def __init__(self, message, summary=None):
        super().__init__(message)
        self.summary = summary

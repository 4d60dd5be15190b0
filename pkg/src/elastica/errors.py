"""Exception hierarchy shared by all modules."""


class ElasticaError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(ElasticaError, ValueError):
    pass


class UndefinedRequest(ElasticaError, ValueError):
    """The requested quantity does not exist for this input (e.g. too few vertices)."""


class ImmersionViolation(ElasticaError, ValueError):
    """Two consecutive vertices (or samples) coincide."""


class SingularConfiguration(ElasticaError, ArithmeticError):
    """A turning angle is too close to pi (fold-back)."""


class NearStraightConfiguration(ElasticaError, ArithmeticError):
    """The Theta matrix is numerically singular."""


class UnsupportedDimension(ElasticaError, ValueError):
    pass


class ContractViolation(ElasticaError, ArithmeticError):
    """A supplied right inverse does not invert the differential."""


class NonConvergence(ElasticaError, RuntimeError):
    """An iteration hit its budget; ``report`` carries the partial history."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class LineSearchFailure(NonConvergence):
    pass

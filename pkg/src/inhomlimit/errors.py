"""Exception hierarchy shared by all modules."""


class InhomLimitError(Exception):
    """Base class for every error raised by this package."""


class SchemeError(InhomLimitError, ValueError):
    pass


class CyclicDriveGraph(SchemeError):
    """Drive fields form a loop that admits no rotating frame."""


class DisconnectedDriveGraph(SchemeError):
    pass


class MissingProbe(SchemeError):
    pass


class BadBranching(SchemeError):
    pass


class UnknownKind(SchemeError):
    pass


class NonPhysicalParams(SchemeError):
    pass


class SolverError(InhomLimitError, ArithmeticError):
    pass


class SingularLiouvillian(SolverError):
    """The steady state is not unique."""


class StepFailure(SolverError):
    pass


class ZeroProbe(InhomLimitError, ValueError):
    pass


class BadGridParams(InhomLimitError, ValueError):
    pass


class BadProfile(InhomLimitError, ValueError):
    pass


class EmptyWindow(InhomLimitError, ValueError):
    pass


class NonPositiveInput(InhomLimitError, ValueError):
    pass


class NonPositiveEta(NonPositiveInput):
    pass


class NoWindowFound(InhomLimitError, ValueError):
    pass


class UnknownFigure(InhomLimitError, ValueError):
    pass


class ConfigError(InhomLimitError, ValueError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


class BoundsExcludePlan(UserWarning):
    """Optimizer bounds do not contain the compensation-plan point."""

"""Exception hierarchy shared by all modules."""


class LlrQuantError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(LlrQuantError, ValueError):
    exit_code = 2


class UnsupportedSize(ConfigError):
    """Constellation size outside the supported square-QAM family."""


class ShapeMismatch(ConfigError):
    pass


class InfeasibleBudget(LlrQuantError):
    """A bit budget cannot be met by any allocation or substitution."""

    exit_code = 3


class TooLarge(ConfigError):
    pass


class TargetUnreachable(LlrQuantError):
    exit_code = 3


class DegenerateSegment(LlrQuantError, ArithmeticError):
    exit_code = 4


class QuadratureNotConverged(LlrQuantError, ArithmeticError):
    exit_code = 4


class MalformedWord(LlrQuantError, ValueError):
    """A compressed word whose codewords run past the fixed word size."""

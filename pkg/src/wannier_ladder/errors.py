"""Exception hierarchy.

Three subtrees map onto the CLI exit codes: usage/configuration problems
(exit 2), violated model assumptions (exit 3), and numerical failures
(exit 4).
"""


class WannierLadderError(Exception):
    """Base class for all package errors."""

    exit_code = 1


# ---------------------------------------------------------------- exit 2

class UsageError(WannierLadderError):
    exit_code = 2


class ConfigError(UsageError):
    pass


class UnknownKey(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


class ConfigTypeError(ConfigError):
    pass


class InvalidGeometry(UsageError):
    pass


class DimensionMismatch(UsageError):
    pass


class InvalidPartition(UsageError):
    pass


class NonPeriodicInput(UsageError):
    pass


# ---------------------------------------------------------------- exit 3

class AssumptionError(WannierLadderError):
    exit_code = 3


class AmbiguousFilling(AssumptionError):
    pass


class GapClosedAtFermiLevel(AssumptionError):
    pass


class UniformGapFailed(AssumptionError):
    pass


# ---------------------------------------------------------------- exit 4

class NumericalError(WannierLadderError):
    exit_code = 4


class NotHermitian(NumericalError):
    pass


class EmptySpectrum(NumericalError):
    pass


class IllConditionedOverlap(NumericalError):
    pass


class BranchContinuationFailed(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class ProjectorRankChanged(NumericalError):
    pass


class DegenerateOverlapSpectrum(NumericalError):
    pass

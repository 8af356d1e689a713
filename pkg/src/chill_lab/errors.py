"""Exception hierarchy shared by every module of the package."""


class ChillLabError(Exception):
    """Base class for all package errors."""


class NonConvergence(ChillLabError):
    """An adaptive numerical procedure did not reach its tolerance."""


class OrderingViolated(ChillLabError):
    """Interface positions are not strictly increasing."""


class GapCollapse(ChillLabError):
    """A gap between neighbouring interfaces became non-positive."""


class StepSizeUnderflow(ChillLabError):
    """The adaptive step size fell below the representable minimum."""


class InnerIntegralUnstable(ChillLabError):
    """Cancellation of the growing factor in the second corrector failed."""


class GridTooCoarse(ChillLabError):
    """The grid spacing exceeds what a stencil operation supports."""


class DomainTooSmall(ChillLabError):
    """The computational interval does not contain the configuration."""


class LinearSolveFailure(ChillLabError):
    """A banded factorisation hit a zero (or non-finite) pivot."""


class BlowUpGuard(ChillLabError):
    """The PDE state left the admissible range |u| <= 1.5."""


class NoZeros(ChillLabError):
    """A sampled field has no sign change."""


class InterfaceCountChanged(ChillLabError):
    """The number of zeros changed between snapshots."""

    def __init__(self, message, index=None, time=None):
        super().__init__(message)
        self.index = index
        self.time = time


class WindowTooShort(ChillLabError):
    """A fit window holds too few samples."""


class ConfigError(ChillLabError):
    """Base class for configuration errors; ``key`` names the culprit."""

    def __init__(self, key, message=""):
        self.key = key
        super().__init__(f"{key}: {message}" if message else key)


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class RangeViolation(ConfigError):
    pass

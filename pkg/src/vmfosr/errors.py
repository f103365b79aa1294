"""Exception types raised across the package."""


class VMFOSRError(Exception):
    """Base class for all package errors."""


class NearZeroNorm(VMFOSRError, ValueError):
    pass


class EmptyInput(VMFOSRError, ValueError):
    pass


class NonPositiveTemperature(VMFOSRError, ValueError):
    pass


class BadDimension(VMFOSRError, ValueError):
    pass


class NonFiniteEvaluation(VMFOSRError, ArithmeticError):
    pass


class DimensionTooSmall(VMFOSRError, ValueError):
    pass


class InvalidClassCounts(VMFOSRError, ValueError):
    pass


class InvalidSigma(VMFOSRError, ValueError):
    pass


class BadIndex(VMFOSRError, IndexError):
    pass


class ShapeMismatch(VMFOSRError, ValueError):
    pass


class ZeroRow(VMFOSRError, ValueError):
    pass


class SingleClass(VMFOSRError, ValueError):
    pass


class NonFiniteLoss(VMFOSRError, ArithmeticError):
    """Training produced a non-finite loss; ``diagnostic`` describes the batch."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class SplitLeak(VMFOSRError, RuntimeError):
    """A training routine was handed test-split or unknown-class samples."""


class BankTooSmall(VMFOSRError, ValueError):
    pass


class ZeroVector(VMFOSRError, ValueError):
    pass


class ClassWithNoSamples(VMFOSRError, ValueError):
    pass


class ConfigError(VMFOSRError, ValueError):
    pass


class MissingCheckpoint(VMFOSRError, FileNotFoundError):
    pass


class GradCheckFailure(VMFOSRError, AssertionError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}

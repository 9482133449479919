"""Exception types raised across the package."""

from __future__ import annotations


class DoubleWellError(Exception):
    """Base class for all package errors."""


class SeparationTooSmall(DoubleWellError):
    pass


class BoxTooSmall(DoubleWellError):
    pass


class MisalignedPlane(DoubleWellError):
    pass


class MisalignedTranslation(DoubleWellError):
    pass


class InvalidDimension(DoubleWellError):
    pass


class NonPositiveSpacing(DoubleWellError):
    pass


class GridMismatch(DoubleWellError):
    pass


class NoConvergence(DoubleWellError):
    def __init__(self, iterations: int, message: str = ""):
        self.iterations = iterations
        super().__init__(message or f"eigensolver did not converge within {iterations} iterations")


class DegenerateBasis(DoubleWellError):
    pass


class PlaneInsideSupport(DoubleWellError):
    pass


class NoDefiniteParity(DoubleWellError):
    pass


class TailTooShort(DoubleWellError):
    pass


class SignChangeInWindow(DoubleWellError):
    pass


class WrongClusterSize(DoubleWellError):
    def __init__(self, n: int, message: str = ""):
        self.n = n
        super().__init__(message or f"expected 2 eigenvalues in the cluster window, found {n}")


class OverlapTooLarge(DoubleWellError):
    pass


class SignChange(DoubleWellError):
    pass


class TooFewSamples(DoubleWellError):
    pass


class ConfigError(DoubleWellError):
    pass

from __future__ import annotations


class AnalysisError(Exception):
    """Base class for every failure raised by the analysis domain."""


class ConfigError(AnalysisError, ValueError):
    pass


class InvalidCutoffError(AnalysisError, ValueError):
    pass


class InsufficientSamplesError(AnalysisError, ValueError):
    pass


class InvalidRatioError(AnalysisError, ValueError):
    pass


class InvalidSplitError(AnalysisError, ValueError):
    pass


class NoPeakError(AnalysisError):
    pass


class ChannelMismatchError(AnalysisError, ValueError):
    pass


class InvalidMassError(AnalysisError, ValueError):
    pass


class RankDeficientError(AnalysisError):
    pass


class NonInvertibleError(AnalysisError):
    pass


class UnstableModelError(AnalysisError):
    pass


class InvalidSpectrumError(AnalysisError, ValueError):
    pass


class NoConvergenceError(AnalysisError):
    pass


class NumericDomainError(AnalysisError):
    def __init__(self, message: str, frequency: float | None = None) -> None:
        super().__init__(message)
        self.frequency = frequency


class InvalidBandError(AnalysisError, ValueError):
    pass


class MissingPeakError(AnalysisError):
    pass


class InsufficientPoolError(AnalysisError, ValueError):
    pass


class GridMismatchError(AnalysisError, ValueError):
    pass


class DegenerateSampleError(AnalysisError, ValueError):
    pass


class NoDataError(AnalysisError):
    pass


class ParseError(AnalysisError):
    def __init__(self, message: str, line: int | None = None, column: str | None = None) -> None:
        super().__init__(message)
        self.line = line
        self.column = column


class FixtureNotFoundError(AnalysisError):
    pass

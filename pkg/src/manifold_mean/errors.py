"""Exception hierarchy shared by all modules."""


class ManifoldMeanError(Exception):
    """Base class for every error raised by this package."""


class RankDeficient(ManifoldMeanError):
    pass


class DimensionMismatch(ManifoldMeanError):
    pass


class FullSpace(ManifoldMeanError):
    pass


class WeightError(ManifoldMeanError):
    pass


class SpectralGapTooSmall(ManifoldMeanError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class BeyondInjectivity(ManifoldMeanError):
    pass


class NotUnique(ManifoldMeanError):
    pass


class NoConvergence(ManifoldMeanError):
    pass


class LeftTube(ManifoldMeanError):
    pass


class NotPositive(ManifoldMeanError):
    pass


class EpsilonTooLarge(ManifoldMeanError):
    def __init__(self, message, epsilon=None, limit=None):
        super().__init__(message)
        self.epsilon = epsilon
        self.limit = limit


class NoSignChange(ManifoldMeanError):
    pass


class SliceFailure(ManifoldMeanError):
    """One or more normal slices failed; ``failures`` maps vertex index to the error."""

    def __init__(self, failures, label=None):
        self.failures = dict(failures)
        self.label = label
        first = min(self.failures)
        err = self.failures[first]
        where = f" at {label}" if label else ""
        super().__init__(
            f"{len(self.failures)} slice(s) failed{where}; first: vertex {first}: "
            f"{type(err).__name__}: {err}"
        )


class SceneError(ManifoldMeanError):
    pass


class ParseError(SceneError):
    def __init__(self, message, line=None, key=None):
        super().__init__(message)
        self.line = line
        self.key = key


class ValidationError(SceneError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class UnsupportedFormat(ManifoldMeanError):
    pass


class IoError(ManifoldMeanError, OSError):
    pass

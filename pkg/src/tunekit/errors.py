"""Exception types shared across the package."""


class TunekitError(Exception):
    """Base class for all package errors."""


class SpaceError(TunekitError):
    """Malformed search-space definition."""


class InvalidConfigError(TunekitError):
    """Configuration does not satisfy its search space."""


class DataError(TunekitError):
    """Malformed dataset or resampling request."""


class MetricUndefinedError(TunekitError):
    """Metric value is undefined for the given inputs (degenerate denominator)."""


class TrainingError(TunekitError):
    """Learner training or prediction failed.

    ``split`` carries the resampling split index when the failure happened
    inside a resampled evaluation.
    """

    def __init__(self, message: str, split: int | None = None):
        super().__init__(message)
        self.split = split


class GPFitError(TunekitError):
    """Gaussian-process fit failed (non-PD Gram after jitter escalation)."""


class LeakageError(TunekitError):
    """Nested-resampling index containment violated."""


class WarmStartError(TunekitError):
    """Prior archive is incompatible with the tuner's search space."""


class RunConfigError(TunekitError):
    """Run-configuration document failed schema validation.

    ``path`` is the dotted location of the offending field.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)

"""Exception types shared across the package."""


class PastNetError(Exception):
    """Base class for all package-specific failures."""


class ConfigurationError(PastNetError, ValueError):
    """A configuration value violates a documented constraint."""


class ShapeMismatchError(PastNetError, ValueError):
    """Two tensors that must agree in shape do not."""


class TrainingDivergedError(PastNetError, RuntimeError):
    """The training loss became non-finite."""


class SolverDivergedError(PastNetError, RuntimeError):
    """A PDE solver produced NaN/Inf state or lost positivity."""


class MetricError(PastNetError, ValueError):
    """A metric is undefined for the given inputs."""


class ContainerError(PastNetError, IOError):
    """Base class for trajectory-container format failures."""


class BadMagicError(ContainerError):
    """The file does not start with the expected magic bytes."""


class MetadataError(ContainerError):
    """The metadata line is missing, malformed, or inconsistent."""


class TruncatedPayloadError(ContainerError):
    """The binary payload is shorter than the header-declared size."""


class TrailingBytesError(ContainerError):
    """The binary payload is longer than the header-declared size."""


class CheckpointError(PastNetError, IOError):
    """A checkpoint file is malformed or incompatible."""

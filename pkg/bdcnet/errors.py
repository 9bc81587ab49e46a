"""Exception hierarchy for bdcnet."""


class BdcnError(Exception):
    """Base class for every error raised by bdcnet."""


class ConfigurationError(BdcnError, ValueError):
    """Invalid architecture, convolution geometry, input size or run configuration."""


class TensorUsageError(BdcnError, ValueError):
    """A tensor operation was called with arguments it cannot accept."""


class TrainingError(BdcnError, RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, term: str | None = None):
        super().__init__(message)
        self.term = term


class IngestionError(BdcnError, ValueError):
    """An image, annotation or manifest could not be turned into a sample."""


class CheckpointIntegrityError(BdcnError, ValueError):
    """A checkpoint or float dump does not match the container format."""


class EvaluationError(BdcnError, RuntimeError):
    """The benchmark could not be run on the given predictions."""

"""Exception and warning types shared across the package."""


class HfsgError(Exception):
    """Base class for every error raised by hfsg."""


class ConfigError(HfsgError, ValueError):
    """A parameter or configuration value violates its constraints."""


class ValidationError(HfsgError, ValueError):
    """Input data is malformed (non-finite values, empty arrays, ...)."""


class DimensionError(HfsgError, ValueError):
    """Array shapes do not agree."""


class AlignmentError(HfsgError, ValueError):
    """Cycle alignment failed, usually for lack of voltage zero crossings."""


class FormatError(HfsgError, ValueError):
    """A binary file failed header or payload validation."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UndefinedFeatureError(HfsgError, ValueError):
    """A feature is mathematically undefined for the given row."""

    def __init__(self, feature, message):
        super().__init__(f"{feature}: {message}")
        self.feature = feature


class UndefinedCorrelationError(HfsgError, ValueError):
    pass


class UndefinedScoreError(HfsgError, ValueError):
    pass


class PipelineError(HfsgError):
    """Error raised by one stage of the dataset pipeline, tagged with that stage."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class HfsgWarning(UserWarning):
    """Recoverable condition worth recording in run provenance."""

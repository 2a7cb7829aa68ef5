"""Exception types shared across the package."""

from __future__ import annotations


class DataError(ValueError):
    """Input data is missing, malformed, or unusable for training."""


class ModelFormatError(DataError):
    """Serialized model bytes are truncated, corrupt, or of an unknown version."""


class ConfigError(ValueError):
    """A run configuration is invalid or incomplete."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names where."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

"""Exception types shared across the package."""


class EvocaeError(Exception):
    """Base class for all package errors."""


class ConfigError(EvocaeError):
    """Invalid configuration value or file."""


class ParseError(EvocaeError):
    """Malformed architecture string."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ArchitectureError(EvocaeError):
    """Encoder path cannot be expanded into a valid network."""


class ShapeError(EvocaeError):
    """Tensor or traced-shape mismatch."""


class TrainingDivergedError(EvocaeError):
    """Loss or gradients became non-finite during training."""

    def __init__(self, message: str, iteration: int | None = None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class SearchError(EvocaeError):
    """Evolution-level failure, e.g. mutation retry cap exceeded."""


class DataError(EvocaeError):
    """Image ingestion or dataset splitting problem."""

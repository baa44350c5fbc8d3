"""Exception types raised across the package."""


class AdaCslError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(AdaCslError, ValueError):
    pass


class InvalidCostError(AdaCslError, ValueError):
    pass


class ConfigError(AdaCslError, ValueError):
    pass


class TrainingDivergedError(AdaCslError, RuntimeError):
    """Raised when a gradient step produces non-finite values."""

    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        self.epoch = epoch
        self.batch = batch
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if batch is not None:
            where.append(f"batch {batch}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)

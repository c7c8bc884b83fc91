"""Exception types shared across the package."""


class CopslError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(CopslError):
    """Invalid static setup: bad dimensions, unknown names, malformed files."""


class InputError(CopslError):
    """Runtime input violates a documented precondition."""


class InternalError(CopslError):
    """An internal invariant broke; indicates a bug, not bad user input."""


class UnsupportedError(CopslError):
    """The requested quantity has no implementation for the given problem."""


class CheckpointError(CopslError):
    """Checkpoint file is missing, malformed, or inconsistent."""


class TrainingDivergedError(CopslError):
    """Training produced a non-finite loss."""

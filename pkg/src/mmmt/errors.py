"""Exception hierarchy shared across the package.

Config/schema problems map to CLI exit code 2, everything else to 1.
"""


class MmmtError(Exception):
    """Base class for all package errors."""


class ConfigError(MmmtError):
    """Invalid configuration value or combination."""


class DimensionError(MmmtError):
    """Tensor shape mismatch."""


class DataError(MmmtError):
    """Malformed or missing input data (e.g. absent modality vector)."""


class LabelError(MmmtError):
    """Label outside the task schema."""


class FormatError(MmmtError):
    """Corrupt or unrecognized binary file. Carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericsError(MmmtError):
    """Non-finite value where a finite one is required (loss, gradient)."""


class InputError(MmmtError):
    """Invalid argument to an evaluation routine."""

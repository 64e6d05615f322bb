"""Exception hierarchy shared across the package."""


class SegcalibError(Exception):
    """Base class for all package-specific errors."""


class InputDomainError(SegcalibError):
    """A value is outside its mathematical domain (e.g. probability not in [0,1])."""


class ShapeError(SegcalibError):
    """Structurally incompatible inputs (mismatched shapes, class counts, bin counts)."""


class ConfigError(SegcalibError):
    """Invalid configuration (bad bin count, unknown loss term, bad weights)."""


class TensorFormatError(SegcalibError):
    """A tensor file failed to parse; the message names the byte offset where possible."""


class TrainingError(SegcalibError):
    """Training diverged or otherwise failed; the message names the epoch."""

"""Exception types shared across the toolkit."""


class EvlfError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(EvlfError):
    """Invalid configuration, argument, or scene/stream content."""


class ParseError(ValidationError):
    """Malformed on-disk artifact; the message names the offending location."""


class DegenerateInputError(EvlfError):
    """Structurally valid input that carries no usable signal
    (zero-variance patch, collinear circle points, constant disparities)."""


class CalibrationError(DegenerateInputError):
    """Self-calibration could not produce a trustworthy result."""

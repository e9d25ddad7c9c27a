"""Exception hierarchy shared across the package."""


class PolanisoError(Exception):
    """Base class for all package errors."""


class ValidationError(PolanisoError, ValueError):
    """Input data violates a documented invariant."""


class FormatError(PolanisoError):
    """Container magic or version not recognised."""


class CorruptFileError(PolanisoError):
    """Container header is readable but the payload is inconsistent."""


class ShapeError(ValidationError):
    """Rasters that must share dimensions do not."""


class DegenerateSpectrumError(PolanisoError):
    """Azimuth spectrum carries no energy to estimate a weighting from."""


class NumericalError(PolanisoError, ArithmeticError):
    """A quantity left its mathematically admissible range beyond tolerance."""


class ConfigError(ValidationError):
    """Pipeline configuration could not be parsed or validated."""

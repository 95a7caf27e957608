"""Exception types shared across the package."""


class EvidmixError(Exception):
    """Base class for all evidmix errors."""


class DomainError(EvidmixError, ValueError):
    """A parameter is outside its mathematical domain (e.g. alpha <= 1)."""


class DimensionError(EvidmixError, ValueError):
    """Array shapes do not agree with the documented contract."""


class DataError(EvidmixError, ValueError):
    """A dataset file or its contents cannot be used."""


class SchemaError(DataError):
    """A dataset file is readable but its columns do not match expectations."""


class ConfigError(EvidmixError, ValueError):
    """Invalid run configuration."""


class CoverageError(EvidmixError, ValueError):
    """A quadrature box captures too little prior mass to be trusted.

    Carries the measured mass so callers can widen the box.
    """

    def __init__(self, message, mass):
        super().__init__(message)
        self.mass = mass


class NumericError(EvidmixError, ArithmeticError):
    """A computation produced non-finite values."""


class DivergenceError(NumericError):
    """Training lost all finite losses for a full epoch.

    ``last_state`` holds the last weights and epoch index that still
    produced a finite loss, so callers can inspect or resume.
    """

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state

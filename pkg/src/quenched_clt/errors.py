"""Exception hierarchy shared by every module of the package."""


class QuenchedError(Exception):
    """Base class for all errors raised by :mod:`quenched_clt`."""


class DomainError(QuenchedError, ValueError):
    """A point lies outside the half-open unit interval."""


class InsufficientRandomnessError(QuenchedError, ValueError):
    """A driving sequence is shorter than the requested horizon."""


class PrecisionError(QuenchedError, ValueError):
    """A grid ensemble was pushed beyond its resolution-safe horizon."""

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class ParameterError(QuenchedError, ValueError):
    """A rate or bound parameter is outside its admissible range."""


class ContractError(QuenchedError, ValueError):
    """Arguments violate a documented precondition."""


class UnsupportedError(QuenchedError, NotImplementedError):
    """The requested computation is not available for this input."""


class DataError(QuenchedError, ValueError):
    """Input data cannot be fitted or summarised."""


class ConfigError(QuenchedError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field

"""Exception types shared across the package."""


class BoltzslabError(Exception):
    pass


class ConfigError(BoltzslabError):
    """Invalid configuration or precondition violation (CLI exit code 2)."""


class DataError(BoltzslabError):
    """Malformed runtime data: NaN/Inf fields, mismatched histories."""


class DivergentIntegralError(BoltzslabError):
    """A quadrature was flagged divergent by the refinement rule."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = tuple(history)


class InsufficientResolutionError(BoltzslabError):
    """Tabulated kernel data cannot resolve the requested integral."""

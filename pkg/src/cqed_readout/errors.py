class ReadoutSimError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSpaceError(ReadoutSimError, ValueError):
    pass


class InvalidLevelError(ReadoutSimError, IndexError):
    pass


class DimensionMismatchError(ReadoutSimError, ValueError):
    pass


class NoContrastError(ReadoutSimError, ValueError):
    """Raised when the two count means cannot be discriminated (n1 <= n0)."""


class ConfigError(ReadoutSimError, ValueError):
    """Invalid scenario configuration; ``key`` names the offending key path."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class IntegrationError(ReadoutSimError, RuntimeError):
    """The integrator could not advance the state (stiffness or divergence)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time

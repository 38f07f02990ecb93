"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A parameter violates a documented precondition."""


class InvalidInputError(ValueError):
    """Input data (fields, samples) is malformed, e.g. non-finite values."""


class DivergedError(RuntimeError):
    """A minimization produced a non-finite energy.

    Carries the last finite iterate in ``last_iterate`` (nodal values array,
    may be None if even the starting point was non-finite).
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ConfigError(ValueError):
    """An experiment config failed to parse or validate; message names the key."""

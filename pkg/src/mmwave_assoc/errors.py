"""Exception types shared across the simulator."""


class ContractViolation(ValueError):
    """An operation was called outside its documented domain."""


class ConstraintViolation(RuntimeError):
    """An association constraint was broken during a run."""


class OutOfHorizonError(ValueError):
    """A trajectory was queried outside ``[0, horizon]``."""


class ConfigError(ValueError):
    """The experiment configuration is missing, malformed or invalid."""


class OracleSizeError(ValueError):
    """An instance is too large for exhaustive enumeration."""

"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or parameter value (bad grid, masking slope, topology, ...)."""


class DomainError(ValueError):
    """Numeric input outside the mathematical domain of an operation (e.g. speed <= 0)."""


class EncodingError(ValueError):
    """Value cannot be represented in the fixed-point / wire encoding."""


class ProtocolError(RuntimeError):
    """A round violated the protocol's structural rules (mismatched tables, bad routing, ...)."""


class PrivacyPreconditionError(ProtocolError):
    """A participant would have to reveal its raw table (no out-neighbor to split with)."""


class IncompleteRoundError(ProtocolError):
    """The base station did not receive an aggregate from every expected participant."""


class BaselineInapplicableError(RuntimeError):
    """The iterative baseline's convexity/step-size conditions do not hold for this fleet."""

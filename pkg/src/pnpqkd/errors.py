"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1, runtime
failures exit 2, and a triggered security alarm exits 3.
"""


class ConfigurationError(ValueError):
    """A spec, schedule, or config file is malformed or inconsistent."""


class DomainError(ValueError):
    """A numeric parameter is outside its physical domain."""


class ResourceLimitError(RuntimeError):
    """A trace exceeded its event budget; names the offending cutoff."""


class ProtocolMismatchError(ValueError):
    """Session records do not match the protocol a sifter expects."""


class EmptyKeyError(RuntimeError):
    """Sifting produced zero bits where at least one was required."""


class DegenerateConfigurationError(RuntimeError):
    """An observable is identically zero so the requested quantity is undefined."""


class AlarmTriggeredError(RuntimeError):
    """A monitoring defense tripped and the run is configured to fail hard."""

"""Exception hierarchy shared by every module."""


class BrunError(Exception):
    """Base class for all package errors."""


class DomainError(BrunError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConstraintError(BrunError, ValueError):
    """A validity constraint of a bound (e.g. z < x**(1/4)) is violated."""


class OutOfRange(BrunError, LookupError):
    """A table lookup falls outside the region covered by the table."""


class DataError(BrunError):
    """A persisted file is missing, corrupt, or fails its checksum."""


class ResourceError(BrunError, MemoryError):
    """Not enough memory for the requested sieve segment buffers."""


class ConfigError(BrunError, ValueError):
    """An invalid run or sieve configuration."""


def with_context(exc: BrunError, context: str) -> BrunError:
    """A copy of ``exc`` (same type) whose message is prefixed with ``context``."""
    return type(exc)(f"{context}: {exc}")

"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class AEMoDError(Exception):
    """Base class for all package errors."""


class ConfigError(AEMoDError, ValueError):
    """Invalid input data. ``field`` names the offending key when known."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        self.detail = message
        super().__init__(message if field is None else f"{field}: {message}")


class InstabilityError(AEMoDError):
    """A customer queue has a nonpositive service margin."""

    def __init__(self, message: str, klass: int | None = None):
        self.klass = klass
        super().__init__(message)


class InfeasibleZoneError(AEMoDError):
    """Fleet arrival rate cannot cover demand plus any positive margin."""


class NoFeasiblePointError(AEMoDError):
    """No decision satisfies the charging-queue stability constraints."""

    def __init__(self, message: str, constraint: str | None = None):
        self.constraint = constraint
        super().__init__(message)


class EnumerationTooLargeError(AEMoDError):
    """A requested enumeration exceeds its configured cap."""

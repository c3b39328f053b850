"""Typed client errors.

Every failure mode surfaces as a ClientError subclass so trainer
integrations can branch without parsing messages.
"""

from __future__ import annotations

__all__ = [
    "ClientError",
    "InvalidRequestError",
    "TransportError",
    "TimeoutError",
    "HTTPStatusError",
    "SchemaValidationError",
]


class ClientError(Exception):
    """Base class for all client failures."""


class InvalidRequestError(ClientError):
    """Client-side input validation failed; nothing was sent."""


class TransportError(ClientError):
    """The connection could not be established or broke mid-flight."""


class TimeoutError(ClientError):
    """The request exceeded the configured timeout."""


class HTTPStatusError(ClientError):
    """The service answered with a 4xx/5xx status."""

    def __init__(self, status: int, body: str) -> None:
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class SchemaValidationError(ClientError):
    """The response shape did not match the service contract.

    field_path names the offending location, e.g. "items[3].raw.focus".
    """

    def __init__(self, field_path: str, message: str) -> None:
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path

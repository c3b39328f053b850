"""Client SDK for the rolereward scoring service."""

from .client import ClientConfig, ScoringClient
from .errors import (
    ClientError,
    HTTPStatusError,
    InvalidRequestError,
    SchemaValidationError,
    TimeoutError,
    TransportError,
)

__version__ = "0.1.0"

__all__ = [
    "ClientConfig",
    "ScoringClient",
    "ClientError",
    "HTTPStatusError",
    "InvalidRequestError",
    "SchemaValidationError",
    "TimeoutError",
    "TransportError",
]

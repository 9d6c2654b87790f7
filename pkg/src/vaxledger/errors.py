"""Error types shared across the registry, engine, ledger and API layers.

Every failure carries a stable machine-readable ``code`` so the HTTP layer
and the simulator can map errors without string matching on messages.
"""

from __future__ import annotations


class VaxError(Exception):
    """Base class; ``code`` is a stable kebab-case identifier."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class NotFoundError(VaxError):
    """Missing entity, session, page or transaction. HTTP 404."""


class AuthFailure(VaxError):
    """Wrong static key, wrong OTP or failed challenge. HTTP 401."""


class ConflictError(VaxError):
    """State refuses the operation: dose cap, stock, used/expired page,
    duplicate keys. HTTP 409."""


class SchemaError(VaxError):
    """Malformed input that never reached domain logic. HTTP 400."""

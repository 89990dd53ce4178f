"""Error types raised by the client.

Two failure families, kept deliberately distinct: the service answered with
an error envelope (ApiError, carrying the server's own code), or the service
could not be reached at all (ServiceUnreachable, a ConnectionError so plain
``except ConnectionError`` works).
"""

from __future__ import annotations

from typing import Any


class ServiceUnreachable(ConnectionError):
    """Transport-level failure: nothing came back from the service."""

    def __init__(self, base_url: str, cause: str):
        super().__init__(f"cannot reach {base_url}: {cause}")
        self.base_url = base_url


class ApiError(Exception):
    """Non-2xx response, decoded from the server's {code, message, detail} envelope.

    ``code`` is the server's stable machine-readable error name (for example
    "syntax_error" or "non_empty_store"); ``status`` is the HTTP status the
    envelope arrived with. ``detail`` is passed through untouched.
    """

    def __init__(self, code: str, message: str, status: int, detail: Any = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.status = status
        self.detail = detail

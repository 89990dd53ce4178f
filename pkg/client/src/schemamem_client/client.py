"""Synchronous HTTP client for a running memory service.

The client speaks only the wire contract: JSON bodies over the /v1 routes,
with errors arriving as {"code", "message", "detail"} envelopes. It never
imports the engine package, so it can ship and version independently.

One method per route. ENDPOINTS is the authoritative map from
(method, path template) to the client method that calls it; tests compare
it against the service's own route export to catch drift in either
direction.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from datetime import datetime
from typing import Any
from urllib.parse import quote

import httpx

from .errors import ApiError, ServiceUnreachable
from .models import (
    Answer,
    BucketInfo,
    BucketSchemas,
    GoalSummary,
    Health,
    IngestReport,
    RecordDetail,
    ResultTable,
)

log = logging.getLogger(__name__)

# Chosen so a cold retry burst stays well under a second.
_BACKOFF_BASE = 0.05

ENDPOINTS: dict[tuple[str, str], str] = {
    ("POST", "/v1/init"): "init",
    ("POST", "/v1/experiences"): "ingest",
    ("POST", "/v1/answer"): "answer",
    ("POST", "/v1/query"): "query",
    ("GET", "/v1/buckets"): "buckets",
    ("GET", "/v1/buckets/{ref}/schemas"): "schemas",
    ("GET", "/v1/records/{record_id}"): "record",
    ("GET", "/v1/health"): "health",
}


@dataclass(frozen=True)
class ClientConfig:
    """Connection settings.

    retries counts extra attempts after the first, and applies to GET
    requests only: every POST mutates or computes, so it is sent once.
    """

    base_url: str
    timeout: float = 10.0
    retries: int = 2

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout!r}")
        if self.retries < 0:
            raise ValueError(f"retries must be >= 0, got {self.retries!r}")


class MemoryClient:
    """Typed access to one service instance.

    A single httpx.Client carries all traffic, so instances are safe to
    share across threads and cheap to keep alive. Usable as a context
    manager; otherwise call close() when done.
    """

    def __init__(self, config: ClientConfig | str, *, transport: Any = None):
        # transport is a seam for tests (httpx.MockTransport); real callers
        # never pass it.
        if isinstance(config, str):
            config = ClientConfig(base_url=config)
        self.config = config
        self._http = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout,
            transport=transport,
        )

    # -- plumbing ----------------------------------------------------------

    def _request(self, method: str, path: str, *, body: dict[str, Any] | None = None) -> Any:
        attempts = 1 + (self.config.retries if method == "GET" else 0)
        last_error: httpx.TransportError | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(_BACKOFF_BASE * (2 ** (attempt - 1)))
            try:
                response = self._http.request(method, path, json=body)
            except httpx.TransportError as exc:
                log.debug("%s %s failed (attempt %d/%d): %s", method, path, attempt + 1, attempts, exc)
                last_error = exc
                continue
            if response.is_success:
                return response.json()
            raise self._api_error(response)
        raise ServiceUnreachable(self.config.base_url, last_error) from last_error

    @staticmethod
    def _api_error(response: httpx.Response) -> ApiError:
        # The service promises an error envelope; anything else (a proxy
        # page, an empty body) degrades to a status-derived code.
        try:
            payload = response.json()
        except ValueError:
            payload = {}
        if not isinstance(payload, dict):
            payload = {}
        return ApiError(
            code=payload.get("code", f"http_{response.status_code}"),
            message=payload.get("message", response.text),
            status=response.status_code,
            detail=payload.get("detail"),
        )

    # -- operations --------------------------------------------------------

    def init(self, goal_spec: dict[str, Any]) -> GoalSummary:
        """Install a goal spec into an empty store."""
        return GoalSummary.from_json(self._request("POST", "/v1/init", body=goal_spec))

    def ingest(
        self,
        raw_text: str,
        *,
        source_tag: str = "user",
        source_quality: float = 1.0,
        received_at: datetime | str | None = None,
    ) -> IngestReport:
        """Feed one experience through the adaptation pipeline."""
        body: dict[str, Any] = {
            "raw_text": raw_text,
            "source_tag": source_tag,
            "source_quality": source_quality,
        }
        if received_at is not None:
            body["received_at"] = (
                received_at.isoformat() if isinstance(received_at, datetime) else received_at
            )
        return IngestReport.from_json(self._request("POST", "/v1/experiences", body=body))

    def answer(self, question: str, *, budget: int | None = None) -> Answer:
        """Ask a natural-language question; the trace shows each tool step."""
        body: dict[str, Any] = {"question": question}
        if budget is not None:
            body["budget"] = budget
        return Answer.from_json(self._request("POST", "/v1/answer", body=body))

    def query(self, text: str) -> ResultTable:
        """Run a query-language statement and return its table."""
        payload = self._request("POST", "/v1/query", body={"query": text})
        return ResultTable.from_json(payload)

    def buckets(self) -> list[BucketInfo]:
        """Per-bucket population counts."""
        payload = self._request("GET", "/v1/buckets")
        return [BucketInfo.from_json(row) for row in payload["buckets"]]

    def schemas(self, ref: str) -> BucketSchemas:
        """Schema and element layout of one bucket, by id or name."""
        payload = self._request("GET", f"/v1/buckets/{quote(ref, safe='')}/schemas")
        return BucketSchemas.from_json(payload)

    def record(self, record_id: str) -> RecordDetail:
        """One record with full provenance fields."""
        payload = self._request("GET", f"/v1/records/{quote(record_id, safe='')}")
        return RecordDetail.from_json(payload)

    def health(self) -> Health:
        return Health.from_json(self._request("GET", "/v1/health"))

    # -- lifecycle ---------------------------------------------------------

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "MemoryClient":
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.close()

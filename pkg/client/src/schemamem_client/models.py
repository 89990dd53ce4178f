"""Typed views of the service's JSON payloads.

The wire format is plain JSON with one extension: timestamps travel as
``{"__ts__": "<iso8601>"}`` objects so they survive row serialization.
Decoding happens here, at the edge, so everything callers touch is already
a datetime. Each model reads exactly the keys the service writes today and
ignores additions, which keeps old clients working against newer services.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Any


def decode_value(j: Any) -> Any:
    """Undo the wire encoding for one cell value."""
    if isinstance(j, dict) and set(j) == {"__ts__"}:
        return datetime.fromisoformat(j["__ts__"])
    return j


@dataclass(frozen=True)
class Health:
    status: str
    version: int
    initialized: bool

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Health":
        return cls(
            status=data["status"],
            version=data["version"],
            initialized=data["initialized"],
        )


@dataclass(frozen=True)
class GoalBucket:
    id: str
    name: str
    schemas: int
    elements: int

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "GoalBucket":
        return cls(
            id=data["id"], name=data["name"],
            schemas=data["schemas"], elements=data["elements"],
        )


@dataclass(frozen=True)
class GoalSummary:
    """What init() built: one row per bucket plus the store version."""

    name: str
    version: int
    buckets: tuple[GoalBucket, ...]

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "GoalSummary":
        return cls(
            name=data["name"],
            version=data["version"],
            buckets=tuple(GoalBucket.from_json(b) for b in data["buckets"]),
        )


@dataclass(frozen=True)
class SegmentReport:
    segment_id: str
    path: str            # Assimilation | Evolution | Creation
    bucket_id: str
    best_schema: str | None
    s_star: float
    kappa_star: float | None
    produced: str

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "SegmentReport":
        return cls(
            segment_id=data["segment_id"],
            path=data["path"],
            bucket_id=data["bucket_id"],
            best_schema=data["best_schema"],
            s_star=data["s_star"],
            kappa_star=data["kappa_star"],
            produced=data["produced"],
        )


@dataclass(frozen=True)
class IngestReport:
    experience_id: str
    counters: dict[str, int]
    conflicts_resolved: int
    per_segment: tuple[SegmentReport, ...]

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "IngestReport":
        return cls(
            experience_id=data["experience_id"],
            counters=dict(data["counters"]),
            conflicts_resolved=data["conflicts_resolved"],
            per_segment=tuple(
                SegmentReport.from_json(s) for s in data["per_segment"]
            ),
        )


@dataclass(frozen=True)
class ToolStep:
    index: int
    tool: str
    args: dict[str, Any]
    observation: Any
    elapsed: float

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ToolStep":
        return cls(
            index=data["index"],
            tool=data["tool"],
            args=dict(data["args"]),
            observation=data["observation"],
            elapsed=data["elapsed"],
        )


@dataclass(frozen=True)
class Answer:
    text: str
    value: Any
    evidence: tuple[str, ...]
    abstained: bool
    trace: tuple[ToolStep, ...]

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Answer":
        return cls(
            text=data["text"],
            value=data["value"],
            evidence=tuple(data["evidence"]),
            abstained=data["abstained"],
            trace=tuple(ToolStep.from_json(s) for s in data["trace"]),
        )


@dataclass(frozen=True)
class ResultTable:
    """Query result with per-row provenance (contributing record ids)."""

    columns: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]
    provenance: tuple[tuple[str, ...], ...]

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ResultTable":
        return cls(
            columns=tuple(data["columns"]),
            rows=tuple(
                tuple(decode_value(v) for v in row) for row in data["rows"]
            ),
            provenance=tuple(tuple(p) for p in data["provenance"]),
        )


@dataclass(frozen=True)
class BucketInfo:
    id: str
    name: str
    centric_info: str
    canonical_keys: tuple[str, ...]
    optional_keys: tuple[str, ...]
    schemas: int
    elements: int
    records: int
    active_records: int

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "BucketInfo":
        return cls(
            id=data["id"],
            name=data["name"],
            centric_info=data["centric_info"],
            canonical_keys=tuple(data["canonical_keys"]),
            optional_keys=tuple(data["optional_keys"]),
            schemas=data["schemas"],
            elements=data["elements"],
            records=data["records"],
            active_records=data["active_records"],
        )


@dataclass(frozen=True)
class ElementSummary:
    id: str
    label: str
    records: int
    active_records: int

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ElementSummary":
        return cls(
            id=data["id"], label=data["label"],
            records=data["records"], active_records=data["active_records"],
        )


@dataclass(frozen=True)
class SchemaSummary:
    id: str
    meta: str
    elements: tuple[ElementSummary, ...]

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "SchemaSummary":
        return cls(
            id=data["id"],
            meta=data["meta"],
            elements=tuple(ElementSummary.from_json(e) for e in data["elements"]),
        )


@dataclass(frozen=True)
class BucketSchemas:
    bucket_id: str
    schemas: tuple[SchemaSummary, ...]

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "BucketSchemas":
        return cls(
            bucket_id=data["bucket_id"],
            schemas=tuple(SchemaSummary.from_json(s) for s in data["schemas"]),
        )


@dataclass
class RecordDetail:
    """One record plus its position in the store layout."""

    id: str
    values: dict[str, Any]
    created_at: datetime
    source_quality: float
    supports: int
    active: bool
    experience_id: str
    bucket_id: str
    schema_id: str
    element_id: str
    element_label: str
    schema_meta: str

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "RecordDetail":
        return cls(
            id=data["id"],
            values={k: decode_value(v) for k, v in data["values"].items()},
            created_at=datetime.fromisoformat(data["created_at"]),
            source_quality=data["source_quality"],
            supports=data["supports"],
            active=data["active"],
            experience_id=data["experience_id"],
            bucket_id=data["bucket_id"],
            schema_id=data["schema_id"],
            element_id=data["element_id"],
            element_label=data["element_label"],
            schema_meta=data["schema_meta"],
        )

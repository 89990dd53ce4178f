"""Query AST and result table.

A structured query narrows records along the hierarchy: bucket, schema
meta glob, element label glob, record predicates. Selection either
projects bare keys or aggregates, optionally grouped. Globs are
case-insensitive. Only active records are visible unless the query opts
into inactive ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any

from ..values import Value, format_timestamp, value_from_json, value_to_json

AGG_FUNCS = ("count", "sum", "avg", "min", "max")
SIMPLE_OPS = ("=", "!=", "<", "<=", ">", ">=")
KEYWORDS = {
    "FROM", "SCHEMA", "ELEMENT", "WHERE", "AND", "GROUP", "BY",
    "SELECT", "BETWEEN", "CONTAINS", "INCLUDE", "INACTIVE", "TRUE", "FALSE",
}


def _bare_ok(ref: str) -> bool:
    # a reference can stay unquoted when it lexes back as one identifier
    return ref.isidentifier() and ref.upper() not in KEYWORDS


@dataclass(frozen=True)
class Predicate:
    """key op value, or key between low..high (inclusive), or contains."""

    key: str
    op: str
    value: Value | None = None
    low: Value | None = None
    high: Value | None = None


@dataclass(frozen=True)
class SelectItem:
    key: str
    fn: str | None = None  # None: bare key projection

    @property
    def column(self) -> str:
        return f"{self.fn}({self.key})" if self.fn else self.key


@dataclass
class StructuredQuery:
    bucket: str | None = None
    meta_filter: str | None = None
    element_filter: str | None = None
    predicates: tuple[Predicate, ...] = ()
    group_by: tuple[str, ...] = ()
    select: tuple[SelectItem, ...] = ()
    include_inactive: bool = False

    def has_aggregates(self) -> bool:
        return any(item.fn for item in self.select)


def _literal_text(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, datetime):
        return format_timestamp(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    return repr(v)


def print_query(q: StructuredQuery) -> str:
    """Canonical text form; parse(print_query(q)) reproduces q exactly."""
    if q.bucket is None:
        raise ValueError("cannot print a query without a bucket reference")
    parts: list[str] = []
    parts.append(
        f"FROM {q.bucket}" if _bare_ok(q.bucket) else f"FROM {json.dumps(q.bucket, ensure_ascii=False)}"
    )
    if q.meta_filter is not None:
        parts.append(f"SCHEMA {json.dumps(q.meta_filter, ensure_ascii=False)}")
    if q.element_filter is not None:
        parts.append(f"ELEMENT {json.dumps(q.element_filter, ensure_ascii=False)}")
    if q.predicates:
        rendered = []
        for p in q.predicates:
            if p.op == "between":
                rendered.append(f"{p.key} BETWEEN {_literal_text(p.low)} AND {_literal_text(p.high)}")
            elif p.op == "contains":
                rendered.append(f"{p.key} CONTAINS {_literal_text(p.value)}")
            else:
                rendered.append(f"{p.key} {p.op} {_literal_text(p.value)}")
        parts.append("WHERE " + " AND ".join(rendered))
    if q.group_by:
        parts.append("GROUP BY " + ", ".join(q.group_by))
    items = ", ".join(i.column if i.fn else i.key for i in q.select)
    parts.append(f"SELECT {items}")
    if q.include_inactive:
        parts.append("INCLUDE INACTIVE")
    return " ".join(parts)


@dataclass
class ResultTable:
    columns: list[str] = field(default_factory=list)
    rows: list[list[Value | None]] = field(default_factory=list)
    provenance: list[list[str]] = field(default_factory=list)  # record ids per row

    def to_json(self) -> dict[str, Any]:
        return {
            "columns": list(self.columns),
            "rows": [[None if v is None else value_to_json(v) for v in row] for row in self.rows],
            "provenance": [list(p) for p in self.provenance],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ResultTable":
        return cls(
            columns=list(data["columns"]),
            rows=[
                [None if v is None else value_from_json(v) for v in row]
                for row in data["rows"]
            ],
            provenance=[list(p) for p in data["provenance"]],
        )

    def render_text(self) -> str:
        """Aligned fixed-width text rendering."""
        def cell(v: Value | None) -> str:
            if v is None:
                return "null"
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, datetime):
                return format_timestamp(v)
            return str(v)

        grid = [list(self.columns)] + [[cell(v) for v in row] for row in self.rows]
        widths = [max(len(row[i]) for row in grid) for i in range(len(self.columns))] if self.columns else []
        lines = []
        for idx, row in enumerate(grid):
            lines.append("  ".join(val.ljust(widths[i]) for i, val in enumerate(row)).rstrip())
            if idx == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)

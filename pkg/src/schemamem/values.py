"""Record value handling.

The value set is closed: string, number (int or float), timestamp, boolean.
Nested extraction output is flattened to dotted key paths before it reaches
the store. Timestamps are timezone-aware UTC datetimes; the JSON codec tags
them so round-trips keep their type.
"""

from __future__ import annotations

import re
from datetime import datetime, timezone
from typing import Any, Mapping

# Sentinel for a canonical key the provider could not extract. It is a plain
# string so it stays inside the closed value set.
MISSING = "__missing__"

_WS = re.compile(r"\s+")

Value = Any  # str | int | float | bool | datetime


def is_value(v: Any) -> bool:
    return isinstance(v, (str, bool, datetime)) or (
        isinstance(v, (int, float)) and not isinstance(v, bool)
    )


def value_type(v: Value) -> str:
    """One of 'string' | 'number' | 'timestamp' | 'boolean'."""
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, datetime):
        return "timestamp"
    if isinstance(v, str):
        return "string"
    raise TypeError(f"not a record value: {v!r}")


def canon_text(s: str) -> str:
    """Canonical string form: case-folded, whitespace collapsed, stripped."""
    return _WS.sub(" ", s).casefold().strip()


def parse_timestamp(text: str) -> datetime:
    """Parse ISO-8601, tolerating a trailing Z and missing timezone."""
    t = text.strip()
    if t.endswith(("Z", "z")):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat()


def flatten(data: Mapping[str, Any], prefix: str = "") -> dict[str, Value]:
    """Flatten nested mappings into dotted key paths; leaves must be values."""
    out: dict[str, Value] = {}
    for key, val in data.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(val, Mapping):
            out.update(flatten(val, path))
        elif is_value(val):
            out[path] = val
        else:
            raise TypeError(f"unsupported value under {path!r}: {type(val).__name__}")
    return out


# ---- JSON codec -------------------------------------------------------------

def value_to_json(v: Value) -> Any:
    if isinstance(v, datetime):
        return {"__ts__": format_timestamp(v)}
    return v


def value_from_json(j: Any) -> Value:
    if isinstance(j, dict):
        if set(j) == {"__ts__"}:
            return parse_timestamp(j["__ts__"])
        raise TypeError(f"unexpected object in value position: {j!r}")
    return j


def values_to_json(values: Mapping[str, Value]) -> dict[str, Any]:
    return {k: value_to_json(v) for k, v in values.items()}


def values_from_json(data: Mapping[str, Any]) -> dict[str, Value]:
    return {k: value_from_json(v) for k, v in data.items()}

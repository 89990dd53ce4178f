"""Goal specifications: a declarative JSON layout for a fresh store.

A goal spec names the memory buckets, their key contracts, and optional
template schemas/elements to pre-seed, plus (optionally) the extraction
rules the lexical provider should run with. Initialization is
all-or-nothing against an empty store.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .errors import ConfigInvalid, EmptySpec, NonEmptyStore
from .provider import ExtractionRules
from .store import MemoryStore

log = logging.getLogger(__name__)


@dataclass
class SchemaTemplate:
    meta: str
    elements: list[str] = field(default_factory=list)


@dataclass
class BucketSpec:
    name: str
    centric_info: str
    canonical_keys: list[str]
    optional_keys: list[str] = field(default_factory=list)
    schemas: list[SchemaTemplate] = field(default_factory=list)


@dataclass
class GoalSpec:
    name: str
    description: str = ""
    buckets: list[BucketSpec] = field(default_factory=list)
    extraction: ExtractionRules | None = None

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "GoalSpec":
        buckets = []
        for b in data.get("buckets", []):
            templates = [
                SchemaTemplate(meta=s["meta"], elements=list(s.get("elements", [])))
                for s in b.get("schemas", [])
            ]
            buckets.append(
                BucketSpec(
                    name=b.get("name", ""),
                    centric_info=b.get("centric_info", ""),
                    canonical_keys=list(b.get("canonical_keys", [])),
                    optional_keys=list(b.get("optional_keys", [])),
                    schemas=templates,
                )
            )
        extraction = None
        if data.get("extraction") is not None:
            extraction = ExtractionRules.from_json(data["extraction"])
        return cls(
            name=data.get("name", ""),
            description=data.get("description", ""),
            buckets=buckets,
            extraction=extraction,
        )

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "description": self.description,
            "buckets": [
                {
                    "name": b.name,
                    "centric_info": b.centric_info,
                    "canonical_keys": list(b.canonical_keys),
                    "optional_keys": list(b.optional_keys),
                    "schemas": [
                        {"meta": s.meta, "elements": list(s.elements)} for s in b.schemas
                    ],
                }
                for b in self.buckets
            ],
        }
        if self.extraction is not None:
            out["extraction"] = self.extraction.to_json()
        return out


def load_goal_spec(source: str | Path | dict[str, Any]) -> GoalSpec:
    """Load a goal spec from a dict, a JSON string, or a file path.

    Raises:
        ConfigInvalid: unreadable file or malformed JSON.
    """
    if isinstance(source, dict):
        return GoalSpec.from_json(source)
    path = Path(source)
    try:
        # a long inline JSON body is not a pathname; exists() can raise ENAMETOOLONG
        is_file = path.exists()
    except OSError:
        is_file = False
    if is_file:
        try:
            return GoalSpec.from_json(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot load goal spec from {path}: {exc}") from exc
    try:
        return GoalSpec.from_json(json.loads(str(source)))
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"goal spec is neither a readable file nor JSON: {exc}") from exc


def validate(spec: GoalSpec) -> list[dict[str, str]]:
    """Structural checks. Returns diagnostics; empty means clean."""
    out: list[dict[str, str]] = []

    def err(msg: str) -> None:
        out.append({"level": "error", "message": msg})

    def warn(msg: str) -> None:
        out.append({"level": "warning", "message": msg})

    if not spec.name.strip():
        err("goal spec has no name")
    if not spec.buckets:
        err("goal spec declares no buckets")
    seen_names: set[str] = set()
    for i, bucket in enumerate(spec.buckets):
        where = f"bucket[{i}] ({bucket.name or 'unnamed'})"
        if not bucket.name.strip():
            err(f"{where}: missing name")
        elif bucket.name in seen_names:
            err(f"{where}: duplicate bucket name")
        else:
            seen_names.add(bucket.name)
        if not bucket.centric_info.strip():
            err(f"{where}: missing centric_info")
        if not bucket.canonical_keys:
            err(f"{where}: canonical key set is empty")
        keys = bucket.canonical_keys + bucket.optional_keys
        if len(set(keys)) != len(keys):
            err(f"{where}: duplicate key names across canonical/optional")
        if not bucket.schemas:
            warn(f"{where}: no template schemas; first experiences will create them")
        for j, template in enumerate(bucket.schemas):
            if not template.meta.strip():
                err(f"{where}: schema[{j}] has empty meta")
    return out


def initialize(
    store: MemoryStore, spec: GoalSpec, now: datetime | None = None
) -> dict[str, Any]:
    """Create the spec's buckets and template schemas in an empty store.

    Returns a layout summary (bucket ids, schema/element counts, version).

    Raises:
        NonEmptyStore: the store already holds buckets.
        EmptySpec: the spec declares no buckets.
        ConfigInvalid: error-level validation diagnostics.
    """
    if now is None:
        now = datetime.now(timezone.utc)
    if store.pool.buckets:
        raise NonEmptyStore("store already initialized", buckets=len(store.pool.buckets))
    if not spec.buckets:
        raise EmptySpec("goal spec declares no buckets")
    problems = [d["message"] for d in validate(spec) if d["level"] == "error"]
    if problems:
        raise ConfigInvalid("goal spec failed validation", problems=problems)

    summary_buckets: list[dict[str, Any]] = []
    for bucket_spec in spec.buckets:
        bucket = store.put_bucket(
            centric_info=bucket_spec.centric_info,
            canonical_keys=bucket_spec.canonical_keys,
            optional_keys=bucket_spec.optional_keys,
            name=bucket_spec.name,
        )
        n_schemas = n_elements = 0
        for template in bucket_spec.schemas:
            schema = store.put_schema(bucket.id, template.meta, created_at=now)
            n_schemas += 1
            for label in template.elements:
                store.put_element(bucket.id, schema.id, label)
                n_elements += 1
        summary_buckets.append(
            {
                "id": bucket.id,
                "name": bucket_spec.name,
                "schemas": n_schemas,
                "elements": n_elements,
            }
        )
    log.info("initialized goal %r with %d buckets", spec.name, len(summary_buckets))
    return {"name": spec.name, "buckets": summary_buckets, "version": store.version}

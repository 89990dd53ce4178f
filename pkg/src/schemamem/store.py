"""Memory store: pool -> buckets -> schemas -> elements -> records.

Durability model: every mutation appends one JSON envelope
``{version, op, payload, crc32}`` to ``<root>/log.jsonl``. Snapshots are
full-state files under ``<root>/snapshots/<version>.snap``. Recovery loads
the newest readable snapshot and replays the log lines past it; a torn tail
line is dropped and truncated away. Versions are strictly monotone.

Concurrency: one writer per bucket (per-bucket locks), a single global lock
serializes version assignment and log appends. Readers that need isolation
take ``snapshot_view()`` which deep-copies the pool under that lock.
Deactivation is the only way a record leaves query results; nothing is ever
deleted.
"""

from __future__ import annotations

import copy
import json
import logging
import threading
import zlib
from bisect import insort
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterator

from .errors import (
    CorruptLog,
    CorruptSnapshot,
    DuplicateKeyName,
    EmptyExperience,
    EmptyKeySet,
    MissingCanonicalKey,
    UnknownTarget,
)
from .ids import new_id
from .values import (
    Value,
    format_timestamp,
    is_value,
    parse_timestamp,
    values_from_json,
    values_to_json,
)

logger = logging.getLogger(__name__)

LOG_NAME = "log.jsonl"
SNAP_DIR = "snapshots"


# ---- domain types -----------------------------------------------------------

@dataclass
class Record:
    """One structured observation, linked back to its source experience."""

    id: str
    values: dict[str, Value]
    created_at: datetime
    source_quality: float
    supports: int
    active: bool
    experience_id: str

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "values": values_to_json(self.values),
            "created_at": format_timestamp(self.created_at),
            "source_quality": self.source_quality,
            "supports": self.supports,
            "active": self.active,
            "experience_id": self.experience_id,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Record":
        return cls(
            id=data["id"],
            values=values_from_json(data["values"]),
            created_at=parse_timestamp(data["created_at"]),
            source_quality=data["source_quality"],
            supports=data["supports"],
            active=data["active"],
            experience_id=data["experience_id"],
        )


@dataclass
class Element:
    id: str
    label: str
    records: list[Record] = field(default_factory=list)

    def active_records(self) -> list[Record]:
        return [r for r in self.records if r.active]


@dataclass
class Schema:
    id: str
    meta: str
    created_at: datetime
    elements: dict[str, Element] = field(default_factory=dict)


@dataclass
class Bucket:
    id: str
    name: str
    centric_info: str
    canonical_keys: tuple[str, ...]
    optional_keys: tuple[str, ...] = ()
    schemas: dict[str, Schema] = field(default_factory=dict)

    def declared_keys(self) -> tuple[str, ...]:
        return self.canonical_keys + self.optional_keys


@dataclass
class Experience:
    id: str
    raw_text: str
    received_at: datetime
    source_tag: str
    source_quality: float


@dataclass
class MemoryPool:
    buckets: dict[str, Bucket] = field(default_factory=dict)
    experiences: dict[str, Experience] = field(default_factory=dict)

    def all_records(self) -> Iterator[tuple[Bucket, Schema, Element, Record]]:
        for bucket in self.buckets.values():
            for schema in bucket.schemas.values():
                for element in schema.elements.values():
                    for record in element.records:
                        yield bucket, schema, element, record


@dataclass(frozen=True)
class SnapshotHandle:
    version: int
    path: Path


def _crc(version: int, op: str, payload: dict[str, Any]) -> int:
    body = json.dumps([version, op, payload], sort_keys=True, separators=(",", ":"))
    return zlib.crc32(body.encode("utf-8"))


def _slug(text: str) -> str:
    return "_".join(text.lower().split())


class MemoryStore:
    """Versioned store over one memory pool, optionally persisted to disk.

    Args:
        root: data directory; None keeps the store purely in memory
              (used for sweep clones and throwaway fixtures).
    """

    def __init__(self, root: str | Path | None = None):
        self.pool = MemoryPool()
        self.version = 0
        self.root = Path(root) if root is not None else None
        self._io_lock = threading.RLock()
        self._bucket_locks: dict[str, threading.RLock] = {}
        self._bucket_index: dict[tuple[str, tuple[str, ...]], str] = {}
        self._record_index: dict[str, tuple[str, str, str]] = {}
        self._log_fh = None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            (self.root / SNAP_DIR).mkdir(exist_ok=True)
            self._recover()
            self._log_fh = open(self.root / LOG_NAME, "a", encoding="utf-8")

    # ---- lifecycle -----------------------------------------------------------

    @classmethod
    def open(cls, root: str | Path) -> "MemoryStore":
        return cls(root)

    def close(self) -> None:
        with self._io_lock:
            if self._log_fh is not None:
                self._log_fh.flush()
                self._log_fh.close()
                self._log_fh = None

    def clone_in_memory(self) -> "MemoryStore":
        """Detached deep copy, not persisted. State and version carry over."""
        clone = MemoryStore(None)
        with self._io_lock:
            clone.pool = copy.deepcopy(self.pool)
            clone.version = self.version
            clone._bucket_index = dict(self._bucket_index)
            clone._record_index = dict(self._record_index)
        return clone

    # ---- mutation plumbing -----------------------------------------------------

    def _bucket_lock(self, bucket_id: str) -> threading.RLock:
        with self._io_lock:
            lock = self._bucket_locks.get(bucket_id)
            if lock is None:
                lock = self._bucket_locks[bucket_id] = threading.RLock()
            return lock

    def _commit(self, op: str, payload: dict[str, Any]) -> None:
        """Apply a mutation and append it to the log under the global lock."""
        with self._io_lock:
            version = self.version + 1
            self._apply(op, payload)
            self.version = version
            if self._log_fh is not None:
                envelope = {
                    "version": version,
                    "op": op,
                    "payload": payload,
                    "crc32": _crc(version, op, payload),
                }
                self._log_fh.write(
                    json.dumps(envelope, sort_keys=True, separators=(",", ":")) + "\n"
                )
                self._log_fh.flush()

    def _apply(self, op: str, payload: dict[str, Any]) -> None:
        if op == "bucket.put":
            bucket = Bucket(
                id=payload["id"],
                name=payload["name"],
                centric_info=payload["centric_info"],
                canonical_keys=tuple(payload["canonical_keys"]),
                optional_keys=tuple(payload["optional_keys"]),
            )
            self.pool.buckets[bucket.id] = bucket
            self._bucket_index[(bucket.centric_info, bucket.canonical_keys)] = bucket.id
        elif op == "experience.put":
            exp = Experience(
                id=payload["id"],
                raw_text=payload["raw_text"],
                received_at=parse_timestamp(payload["received_at"]),
                source_tag=payload["source_tag"],
                source_quality=payload["source_quality"],
            )
            self.pool.experiences[exp.id] = exp
        elif op == "schema.put":
            bucket = self.pool.buckets[payload["bucket_id"]]
            schema = Schema(
                id=payload["id"],
                meta=payload["meta"],
                created_at=parse_timestamp(payload["created_at"]),
            )
            bucket.schemas[schema.id] = schema
        elif op == "element.put":
            bucket = self.pool.buckets[payload["bucket_id"]]
            schema = bucket.schemas[payload["schema_id"]]
            element = Element(id=payload["id"], label=payload["label"])
            schema.elements[element.id] = element
        elif op == "record.insert":
            element = self._element(
                payload["bucket_id"], payload["schema_id"], payload["element_id"]
            )
            record = Record.from_json(payload["record"])
            # keep records ordered by created_at; stable among equals
            insort(element.records, record, key=lambda r: r.created_at)
            self._record_index[record.id] = (
                payload["bucket_id"],
                payload["schema_id"],
                payload["element_id"],
            )
        elif op == "record.active":
            _, _, _, record = self.find_record(payload["record_id"])
            record.active = payload["active"]
        elif op == "record.supports":
            _, _, _, record = self.find_record(payload["record_id"])
            record.supports = payload["supports"]
        else:
            raise CorruptLog(f"unknown op in log: {op}")

    def _element(self, bucket_id: str, schema_id: str, element_id: str) -> Element:
        try:
            return self.pool.buckets[bucket_id].schemas[schema_id].elements[element_id]
        except KeyError as exc:
            raise UnknownTarget(f"no such target: {exc.args[0]}") from exc

    # ---- public mutations --------------------------------------------------------

    def put_bucket(
        self,
        centric_info: str,
        canonical_keys: list[str] | tuple[str, ...],
        optional_keys: list[str] | tuple[str, ...] = (),
        name: str | None = None,
    ) -> Bucket:
        """Create a bucket, or return the existing one for the same
        (centric_info, canonical_keys) pair.

        Raises:
            EmptyKeySet: no canonical keys given.
            DuplicateKeyName: a key repeats across canonical + optional.
        """
        keys = tuple(canonical_keys)
        extras = tuple(optional_keys)
        if not keys:
            raise EmptyKeySet("a bucket needs at least one canonical key")
        all_keys = keys + extras
        if len(set(all_keys)) != len(all_keys):
            raise DuplicateKeyName(f"duplicate key in {all_keys}")
        with self._io_lock:
            existing = self._bucket_index.get((centric_info, keys))
            if existing is not None:
                return self.pool.buckets[existing]
            payload = {
                "id": new_id("bkt"),
                "name": name if name is not None else centric_info,
                "centric_info": centric_info,
                "canonical_keys": list(keys),
                "optional_keys": list(extras),
            }
            self._commit("bucket.put", payload)
            return self.pool.buckets[payload["id"]]

    def put_experience(
        self,
        raw_text: str,
        received_at: datetime,
        source_tag: str = "",
        source_quality: float = 0.5,
    ) -> Experience:
        if not raw_text.strip():
            raise EmptyExperience("experience raw_text is empty")
        if not 0.0 <= source_quality <= 1.0:
            raise ValueError("source_quality must be within [0, 1]")
        payload = {
            "id": new_id("exp"),
            "raw_text": raw_text,
            "received_at": format_timestamp(received_at),
            "source_tag": source_tag,
            "source_quality": source_quality,
        }
        with self._io_lock:
            self._commit("experience.put", payload)
            return self.pool.experiences[payload["id"]]

    def put_schema(self, bucket_id: str, meta: str, created_at: datetime) -> Schema:
        if bucket_id not in self.pool.buckets:
            raise UnknownTarget(f"no such bucket: {bucket_id}")
        if not meta.strip():
            raise ValueError("schema meta is empty")
        with self._bucket_lock(bucket_id):
            payload = {
                "bucket_id": bucket_id,
                "id": new_id("sch"),
                "meta": meta,
                "created_at": format_timestamp(created_at),
            }
            self._commit("schema.put", payload)
            return self.pool.buckets[bucket_id].schemas[payload["id"]]

    def put_element(self, bucket_id: str, schema_id: str, label: str) -> Element:
        bucket = self.pool.buckets.get(bucket_id)
        if bucket is None:
            raise UnknownTarget(f"no such bucket: {bucket_id}")
        if schema_id not in bucket.schemas:
            raise UnknownTarget(f"no such schema: {schema_id}")
        with self._bucket_lock(bucket_id):
            payload = {
                "bucket_id": bucket_id,
                "schema_id": schema_id,
                "id": new_id("elt"),
                "label": label,
            }
            self._commit("element.put", payload)
            return bucket.schemas[schema_id].elements[payload["id"]]

    def insert_record(
        self,
        bucket_id: str,
        schema_id: str,
        element_id: str,
        values: dict[str, Value],
        created_at: datetime,
        source_quality: float,
        experience_id: str,
        supports: int = 0,
        active: bool = True,
    ) -> Record:
        """Append a record to an element (multiset semantics, no dedup).

        Raises:
            UnknownTarget: the bucket/schema/element path does not exist.
            MissingCanonicalKey: values lack one of the bucket's canonical keys.
        """
        bucket = self.pool.buckets.get(bucket_id)
        if bucket is None:
            raise UnknownTarget(f"no such bucket: {bucket_id}")
        self._element(bucket_id, schema_id, element_id)
        for key in bucket.canonical_keys:
            if key not in values:
                raise MissingCanonicalKey(f"record lacks canonical key {key!r}", key=key)
        for key, val in values.items():
            if not is_value(val):
                raise TypeError(f"unsupported value type for {key!r}: {type(val).__name__}")
        if supports < 0:
            raise ValueError("supports must be >= 0")
        record = Record(
            id=new_id("rec"),
            values=dict(values),
            created_at=created_at,
            source_quality=source_quality,
            supports=supports,
            active=active,
            experience_id=experience_id,
        )
        with self._bucket_lock(bucket_id):
            payload = {
                "bucket_id": bucket_id,
                "schema_id": schema_id,
                "element_id": element_id,
                "record": record.to_json(),
            }
            self._commit("record.insert", payload)
            # hand back the pooled instance, same as the other put_* methods
            return self.find_record(record.id)[3]

    def set_record_active(self, record_id: str, active: bool) -> None:
        bucket_id, _, _ = self._locate(record_id)
        with self._bucket_lock(bucket_id):
            _, _, _, record = self.find_record(record_id)
            if record.active == active:
                return
            self._commit("record.active", {"record_id": record_id, "active": active})

    def add_support(self, record_id: str, count: int = 1) -> None:
        bucket_id, _, _ = self._locate(record_id)
        with self._bucket_lock(bucket_id):
            _, _, _, record = self.find_record(record_id)
            self._commit(
                "record.supports",
                {"record_id": record_id, "supports": record.supports + count},
            )

    # ---- lookups --------------------------------------------------------------

    def _locate(self, record_id: str) -> tuple[str, str, str]:
        loc = self._record_index.get(record_id)
        if loc is None:
            raise UnknownTarget(f"no such record: {record_id}")
        return loc

    def find_record(self, record_id: str) -> tuple[Bucket, Schema, Element, Record]:
        bucket_id, schema_id, element_id = self._locate(record_id)
        bucket = self.pool.buckets[bucket_id]
        schema = bucket.schemas[schema_id]
        element = schema.elements[element_id]
        for record in element.records:
            if record.id == record_id:
                return bucket, schema, element, record
        raise UnknownTarget(f"no such record: {record_id}")

    def resolve_bucket_ref(self, ref: str) -> Bucket | None:
        """Find a bucket by id, name (case-insensitive) or name slug."""
        if ref in self.pool.buckets:
            return self.pool.buckets[ref]
        low = ref.lower()
        for bucket in self.pool.buckets.values():
            if bucket.name.lower() == low or _slug(bucket.name) == low:
                return bucket
        return None

    def has_buckets(self) -> bool:
        return bool(self.pool.buckets)

    def snapshot_view(self) -> MemoryPool:
        """Point-in-time deep copy for isolated reads."""
        with self._io_lock:
            return copy.deepcopy(self.pool)

    # ---- canonical serialization ---------------------------------------------------

    def canonical_state(self) -> dict[str, Any]:
        pool = self.pool
        buckets = {}
        for bucket in pool.buckets.values():
            schemas = {}
            for schema in bucket.schemas.values():
                elements = {}
                for element in schema.elements.values():
                    elements[element.id] = {
                        "label": element.label,
                        "records": [r.to_json() for r in element.records],
                    }
                schemas[schema.id] = {
                    "meta": schema.meta,
                    "created_at": format_timestamp(schema.created_at),
                    "elements": elements,
                }
            buckets[bucket.id] = {
                "name": bucket.name,
                "centric_info": bucket.centric_info,
                "canonical_keys": list(bucket.canonical_keys),
                "optional_keys": list(bucket.optional_keys),
                "schemas": schemas,
            }
        experiences = {
            e.id: {
                "raw_text": e.raw_text,
                "received_at": format_timestamp(e.received_at),
                "source_tag": e.source_tag,
                "source_quality": e.source_quality,
            }
            for e in pool.experiences.values()
        }
        return {"version": self.version, "buckets": buckets, "experiences": experiences}

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_state(), sort_keys=True, separators=(",", ":"))

    def _load_state(self, state: dict[str, Any]) -> None:
        self.pool = MemoryPool()
        self._bucket_index.clear()
        self._record_index.clear()
        for bucket_id, b in state["buckets"].items():
            bucket = Bucket(
                id=bucket_id,
                name=b["name"],
                centric_info=b["centric_info"],
                canonical_keys=tuple(b["canonical_keys"]),
                optional_keys=tuple(b["optional_keys"]),
            )
            self.pool.buckets[bucket_id] = bucket
            self._bucket_index[(bucket.centric_info, bucket.canonical_keys)] = bucket_id
            for schema_id, s in b["schemas"].items():
                schema = Schema(
                    id=schema_id,
                    meta=s["meta"],
                    created_at=parse_timestamp(s["created_at"]),
                )
                bucket.schemas[schema_id] = schema
                for element_id, el in s["elements"].items():
                    element = Element(id=element_id, label=el["label"])
                    schema.elements[element_id] = element
                    for r in el["records"]:
                        record = Record.from_json(r)
                        element.records.append(record)
                        self._record_index[record.id] = (bucket_id, schema_id, element_id)
        for exp_id, e in state["experiences"].items():
            self.pool.experiences[exp_id] = Experience(
                id=exp_id,
                raw_text=e["raw_text"],
                received_at=parse_timestamp(e["received_at"]),
                source_tag=e["source_tag"],
                source_quality=e["source_quality"],
            )
        self.version = state["version"]

    # ---- snapshots and recovery ------------------------------------------------------

    def snapshot(self) -> SnapshotHandle:
        """Write the full state to ``snapshots/<version>.snap``."""
        if self.root is None:
            raise ValueError("in-memory store has no snapshot directory")
        with self._io_lock:
            state = self.canonical_state()
            body = json.dumps(
                ["snapshot/1", self.version, state], sort_keys=True, separators=(",", ":")
            )
            doc = {
                "format": "snapshot/1",
                "version": self.version,
                "state": state,
                "crc32": zlib.crc32(body.encode("utf-8")),
            }
            path = self.root / SNAP_DIR / f"{self.version:012d}.snap"
            path.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
            return SnapshotHandle(version=self.version, path=path)

    @staticmethod
    def read_snapshot(handle: SnapshotHandle | Path) -> dict[str, Any]:
        path = handle.path if isinstance(handle, SnapshotHandle) else handle
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            body = json.dumps(
                ["snapshot/1", doc["version"], doc["state"]],
                sort_keys=True,
                separators=(",", ":"),
            )
            if doc.get("format") != "snapshot/1" or zlib.crc32(body.encode("utf-8")) != doc["crc32"]:
                raise CorruptSnapshot(f"snapshot failed integrity check: {path}")
            return doc
        except CorruptSnapshot:
            raise
        except Exception as exc:
            raise CorruptSnapshot(f"unreadable snapshot {path}: {exc}") from exc

    def restore(self, handle: SnapshotHandle | Path) -> MemoryPool:
        """Load a snapshot into a detached pool (the live pool is untouched).

        Raises:
            CorruptSnapshot: missing, truncated or checksum-mismatched file.
        """
        doc = self.read_snapshot(handle)
        scratch = MemoryStore(None)
        scratch._load_state(doc["state"])
        return scratch.pool

    def _recover(self) -> None:
        assert self.root is not None
        snap_dir = self.root / SNAP_DIR
        base_version = 0
        for snap_path in sorted(snap_dir.glob("*.snap"), reverse=True):
            try:
                doc = self.read_snapshot(snap_path)
            except CorruptSnapshot:
                logger.warning("skipping corrupt snapshot %s", snap_path)
                continue
            self._load_state(doc["state"])
            base_version = doc["version"]
            break
        log_path = self.root / LOG_NAME
        if not log_path.exists():
            self.version = max(self.version, base_version)
            return
        raw = log_path.read_bytes()
        offset = 0
        good_end = 0
        torn = False
        expect = None
        for line in raw.split(b"\n"):
            if not line:
                offset += 1
                continue
            line_end = offset + len(line) + 1
            envelope = None
            try:
                envelope = json.loads(line.decode("utf-8"))
                crc = _crc(envelope["version"], envelope["op"], envelope["payload"])
                if crc != envelope["crc32"]:
                    envelope = None
            except Exception:
                envelope = None
            if envelope is None:
                torn = True
                offset = line_end
                continue
            if torn:
                # a valid line after an invalid one is corruption, not a crash
                raise CorruptLog(f"damaged line mid-log near byte {good_end}")
            version = envelope["version"]
            if expect is not None and version != expect:
                raise CorruptLog(f"version gap in log: expected {expect}, got {version}")
            expect = version + 1
            if version > base_version:
                self._apply(envelope["op"], envelope["payload"])
                self.version = version
            offset = line_end
            good_end = line_end
        if torn:
            logger.warning("dropping torn log tail after byte %d", good_end)
            with open(log_path, "r+b") as fh:
                fh.truncate(good_end)
        self.version = max(self.version, base_version)

    # ---- invariants ------------------------------------------------------------------

    def check_invariants(self) -> None:
        """Assert structural invariants; used by tests."""
        seen_records: set[str] = set()
        for bucket in self.pool.buckets.values():
            assert bucket.canonical_keys, f"bucket {bucket.id} has no canonical keys"
            declared = bucket.declared_keys()
            assert len(set(declared)) == len(declared)
            for schema in bucket.schemas.values():
                assert schema.meta.strip()
                for element in schema.elements.values():
                    stamps = [r.created_at for r in element.records]
                    assert stamps == sorted(stamps), "records out of created_at order"
                    for record in element.records:
                        assert record.id not in seen_records, "record id reused"
                        seen_records.add(record.id)
                        for key in bucket.canonical_keys:
                            assert key in record.values, (
                                f"record {record.id} lacks canonical key {key}"
                            )
                        assert record.experience_id in self.pool.experiences or (
                            record.experience_id == ""
                        ), f"dangling experience link on {record.id}"

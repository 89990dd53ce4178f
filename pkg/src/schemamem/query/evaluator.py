"""Query evaluation over a memory pool.

Filtering walks bucket -> schema (meta glob) -> element (label glob) ->
record predicates. Aggregates follow SQL conventions: records missing the
key are skipped, count of nothing is 0, every other aggregate of nothing
is null. Rows carry provenance: the record ids that produced them.
"""

from __future__ import annotations

import math
from fnmatch import fnmatchcase
from typing import Iterable

from ..errors import InvalidQuery, TypeMismatch, UnknownBucket, UnknownKey
from ..store import Bucket, MemoryPool, Record
from ..values import Value, value_type
from .model import AGG_FUNCS, ResultTable, SelectItem, StructuredQuery


def _glob(pattern: str, text: str) -> bool:
    return fnmatchcase(text.casefold(), pattern.casefold())


def _resolve_bucket(pool: MemoryPool, ref: str) -> Bucket:
    if ref in pool.buckets:
        return pool.buckets[ref]
    low = ref.lower()
    slug = "_".join(low.split())
    for bucket in pool.buckets.values():
        name = bucket.name.lower()
        if name == low or "_".join(name.split()) == slug:
            return bucket
    raise UnknownBucket(f"no bucket matches {ref!r}", ref=ref)


def _comparable(v: Value) -> tuple:
    """Total order across the value universe, for deterministic row sort."""
    if v is None:
        return (0, "")
    t = value_type(v)
    if t == "boolean":
        return (1, bool(v))
    if t == "number":
        return (2, float(v))
    if t == "timestamp":
        return (3, v.timestamp())
    return (4, v)


def _check_same_family(key: str, a: Value, b: Value) -> None:
    ta, tb = value_type(a), value_type(b)
    if ta != tb:
        raise TypeMismatch(f"key {key!r}: cannot compare {ta} with {tb}", key=key)


def _matches(record: Record, predicates) -> bool:
    for p in predicates:
        if p.key not in record.values:
            return False
        value = record.values[p.key]
        if p.op == "between":
            _check_same_family(p.key, value, p.low)
            _check_same_family(p.key, value, p.high)
            if not (p.low <= value <= p.high):
                return False
        elif p.op == "contains":
            if value_type(value) != "string" or not isinstance(p.value, str):
                raise TypeMismatch(f"key {p.key!r}: contains needs strings", key=p.key)
            if p.value.casefold() not in value.casefold():
                return False
        else:
            _check_same_family(p.key, value, p.value)
            if p.op == "=":
                ok = value == p.value
            elif p.op == "!=":
                ok = value != p.value
            elif p.op == "<":
                ok = value < p.value
            elif p.op == "<=":
                ok = value <= p.value
            elif p.op == ">":
                ok = value > p.value
            else:
                ok = value >= p.value
            if not ok:
                return False
    return True


def _collect(pool: MemoryPool, q: StructuredQuery, restrict_to: set[str] | None) -> list[Record]:
    if q.bucket is not None:
        buckets: Iterable[Bucket] = [_resolve_bucket(pool, q.bucket)]
    else:
        buckets = pool.buckets.values()
    out: list[Record] = []
    for bucket in buckets:
        for schema in bucket.schemas.values():
            if q.meta_filter is not None and not _glob(q.meta_filter, schema.meta):
                continue
            for element in schema.elements.values():
                if q.element_filter is not None and not _glob(q.element_filter, element.label):
                    continue
                for record in element.records:
                    if not record.active and not q.include_inactive:
                        continue
                    if restrict_to is not None and record.id not in restrict_to:
                        continue
                    if _matches(record, q.predicates):
                        out.append(record)
    out.sort(key=lambda r: r.id)
    return out


def _validate(q: StructuredQuery, pool: MemoryPool) -> None:
    if not q.select:
        raise InvalidQuery("a query must select at least one item")
    bare = [i.key for i in q.select if i.fn is None]
    if q.has_aggregates() and bare and not set(bare) <= set(q.group_by):
        raise InvalidQuery(
            "bare keys mixed with aggregates must appear in GROUP BY"
        )
    for item in q.select:
        if item.fn is not None and item.fn not in AGG_FUNCS:
            raise InvalidQuery(f"unknown aggregate {item.fn!r}")
    if q.bucket is not None:
        declared = set(_resolve_bucket(pool, q.bucket).declared_keys())
        names = [p.key for p in q.predicates]
        names.extend(q.group_by)
        names.extend(i.key for i in q.select if i.key != "*")
        for name in names:
            if name not in declared:
                raise UnknownKey(f"key {name!r} is not declared on this bucket", key=name)


def _aggregate(fn: str, key: str, records: list[Record]) -> Value | None:
    if fn == "count":
        if key == "*":
            return len(records)
        return sum(1 for r in records if key in r.values)
    present = [r.values[key] for r in records if key in r.values]
    if not present:
        return None
    if fn in ("sum", "avg"):
        for v in present:
            if value_type(v) != "number":
                raise TypeMismatch(f"{fn}({key}) over non-numeric value", key=key)
        total = math.fsum(present)
        if fn == "sum":
            return int(total) if all(isinstance(v, int) for v in present) else total
        return total / len(present)
    # min / max work within one comparable family
    first = value_type(present[0])
    for v in present:
        if value_type(v) != first:
            raise TypeMismatch(f"{fn}({key}) over mixed value types", key=key)
    return min(present) if fn == "min" else max(present)


def evaluate(
    q: StructuredQuery,
    pool: MemoryPool,
    restrict_to: set[str] | None = None,
) -> ResultTable:
    """Evaluate a validated query against a pool.

    Args:
        restrict_to: optional record-id allowlist; used to replay answers
            from their evidence alone.

    Raises:
        UnknownBucket, UnknownKey, TypeMismatch, InvalidQuery
    """
    _validate(q, pool)
    records = _collect(pool, q, restrict_to)
    columns = [i.column for i in q.select]

    if not q.has_aggregates():
        table = ResultTable(columns=columns)
        for record in records:
            table.rows.append([record.values.get(i.key) for i in q.select])
            table.provenance.append([record.id])
        return table

    if not q.group_by:
        row = [_aggregate(i.fn, i.key, records) if i.fn else None for i in q.select]
        return ResultTable(
            columns=columns,
            rows=[row],
            provenance=[[r.id for r in records]],
        )

    groups: dict[tuple, list[Record]] = {}
    for record in records:
        key = tuple(record.values.get(k) for k in q.group_by)
        groups.setdefault(key, []).append(record)
    table = ResultTable(columns=columns)
    for group_key in sorted(groups, key=lambda ks: tuple(_comparable(v) for v in ks)):
        members = groups[group_key]
        by_name = dict(zip(q.group_by, group_key))
        row: list[Value | None] = []
        for item in q.select:
            if item.fn is None:
                row.append(by_name.get(item.key))
            else:
                row.append(_aggregate(item.fn, item.key, members))
        table.rows.append(row)
        table.provenance.append([r.id for r in members])
    return table

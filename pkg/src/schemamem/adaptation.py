"""Tri-modal adaptation: route each segment to assimilation, evolution or
creation.

For one segment the dispatch is: score every schema in the routed bucket,
take the argmax (ties to the lowest schema id). If the best score clears
the schema threshold, score that schema's elements the same way; clearing
the element threshold assimilates the segment's record into the best
element, otherwise a fresh element is evolved. A best schema score under
the threshold creates a new schema seeded with the segment's meta, and the
triggering record is attached immediately through an internal element add
so no experience is dropped. Both threshold comparisons are inclusive
(score equal to theta takes the richer branch).

After every segment of an experience is placed, conflict resolution runs
over all schemas the experience touched.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Iterable, Sequence

from .conflict import ReliabilityWeights, resolve
from .errors import InvalidTheta, NoBuckets
from .provider import CognitionProvider, ConflictPolicy, Segment
from .store import Bucket, Element, Experience, MemoryStore, Schema
from .values import MISSING, parse_timestamp

logger = logging.getLogger(__name__)

PATH_ASSIMILATION = "Assimilation"
PATH_EVOLUTION = "Evolution"
PATH_CREATION = "Creation"


def validate_theta(value: float, name: str = "theta") -> float:
    if not 0.0 <= value <= 1.0:
        raise InvalidTheta(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass
class AdaptationConfig:
    theta_meta: float = 0.70
    theta_elem: float = 0.60
    weights: ReliabilityWeights = field(default_factory=ReliabilityWeights)
    policy: ConflictPolicy = field(default_factory=ConflictPolicy)
    age_unit_seconds: float = 86400.0
    supports_normalization: str = "saturating"

    def __post_init__(self):
        validate_theta(self.theta_meta, "theta_meta")
        validate_theta(self.theta_elem, "theta_elem")


@dataclass
class DispatchDecision:
    path: str
    schema_id: str | None
    element_id: str | None
    s_star: float
    kappa_star: float | None


@dataclass
class SegmentOutcome:
    segment_id: str
    path: str
    bucket_id: str
    best_schema: str | None
    s_star: float
    kappa_star: float | None
    produced: str

    def to_json(self) -> dict[str, Any]:
        return {
            "segment_id": self.segment_id,
            "path": self.path,
            "bucket_id": self.bucket_id,
            "best_schema": self.best_schema,
            "s_star": self.s_star,
            "kappa_star": self.kappa_star,
            "produced": self.produced,
        }


@dataclass
class AdaptationReport:
    experience_id: str
    per_segment: list[SegmentOutcome] = field(default_factory=list)
    counters: dict[str, int] = field(
        default_factory=lambda: {"assimilation": 0, "evolution": 0, "creation": 0}
    )
    conflicts_resolved: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "experience_id": self.experience_id,
            "per_segment": [s.to_json() for s in self.per_segment],
            "counters": dict(self.counters),
            "conflicts_resolved": self.conflicts_resolved,
        }


def best_schema(
    provider: CognitionProvider, segment: Segment, bucket: Bucket
) -> tuple[Schema | None, float]:
    """Argmax schema by meta similarity; ties go to the lowest schema id."""
    best: Schema | None = None
    best_score = 0.0
    for schema in sorted(bucket.schemas.values(), key=lambda s: s.id):
        score = provider.schema_similarity(segment, schema)
        if best is None or score > best_score:
            best, best_score = schema, score
    return best, best_score if best is not None else 0.0


def best_element(
    provider: CognitionProvider, segment: Segment, schema: Schema
) -> tuple[Element | None, float]:
    best: Element | None = None
    best_score = 0.0
    for element in sorted(schema.elements.values(), key=lambda e: e.id):
        score = provider.element_compatibility(segment, element)
        if best is None or score > best_score:
            best, best_score = element, score
    return best, best_score if best is not None else 0.0


def choose_path(
    provider: CognitionProvider,
    segment: Segment,
    bucket: Bucket,
    theta_meta: float,
    theta_elem: float,
) -> DispatchDecision:
    """Pure dispatch decision; mutates nothing."""
    schema, s_star = best_schema(provider, segment, bucket)
    if schema is None or s_star < theta_meta:
        return DispatchDecision(PATH_CREATION, None, None, s_star, None)
    element, kappa = best_element(provider, segment, schema)
    if element is None:
        return DispatchDecision(PATH_EVOLUTION, schema.id, None, s_star, None)
    if kappa >= theta_elem:
        return DispatchDecision(PATH_ASSIMILATION, schema.id, element.id, s_star, kappa)
    return DispatchDecision(PATH_EVOLUTION, schema.id, None, s_star, kappa)


def _record_matches(new_values, existing, canonical_keys, policy: ConflictPolicy) -> bool:
    # supports bumping requires real agreement: every canonical key present,
    # non-sentinel on both sides, and conflict-free
    for key in canonical_keys:
        a = new_values.get(key)
        b = existing.values.get(key)
        if a is None or b is None or a == MISSING or b == MISSING:
            return False
        if policy.value_conflict(key, a, b):
            return False
    return True


def _insert(
    store: MemoryStore,
    segment: Segment,
    bucket: Bucket,
    schema_id: str,
    element_id: str,
    experience: Experience,
    now: datetime,
):
    # records carry the experience's timestamp, not ingest wall-clock:
    # recency scoring must reflect how old the information is, and replaying
    # a backlog must produce the same winners as live ingestion would have
    return store.insert_record(
        bucket.id,
        schema_id,
        element_id,
        segment.extracted_record,
        created_at=experience.received_at,
        source_quality=experience.source_quality,
        experience_id=experience.id,
    )


def apply_assimilation(
    store: MemoryStore,
    segment: Segment,
    bucket: Bucket,
    schema: Schema,
    element: Element,
    experience: Experience,
    config: AdaptationConfig,
    now: datetime,
) -> str:
    """Add the segment's record to an existing element; agreeing records
    already present gain one support each. Returns the new record id."""
    for existing in list(element.records):
        if existing.active and _record_matches(
            segment.extracted_record, existing, bucket.canonical_keys, config.policy
        ):
            store.add_support(existing.id)
    record = _insert(store, segment, bucket, schema.id, element.id, experience, now)
    return record.id


def apply_evolution(
    store: MemoryStore,
    segment: Segment,
    bucket: Bucket,
    schema: Schema,
    experience: Experience,
    now: datetime,
) -> str:
    """Grow the schema with a new element seeded by the segment's record.
    Returns the new element id."""
    element = store.put_element(bucket.id, schema.id, segment.entity or segment.extracted_meta)
    _insert(store, segment, bucket, schema.id, element.id, experience, now)
    return element.id


def apply_creation(
    store: MemoryStore,
    segment: Segment,
    bucket: Bucket,
    experience: Experience,
    now: datetime,
) -> str:
    """Create a schema from the segment's meta, then attach the record via
    an internal element add. Returns the new schema id."""
    schema = store.put_schema(bucket.id, segment.extracted_meta, created_at=now)
    apply_evolution(store, segment, bucket, schema, experience, now)
    return schema.id


def adapt(
    store: MemoryStore,
    provider: CognitionProvider,
    experience: Experience,
    config: AdaptationConfig,
    now: datetime,
) -> AdaptationReport:
    """Run the full adaptation pass for one experience.

    Every segment takes exactly one of the three paths; afterwards conflict
    resolution runs on every schema this experience modified.

    Raises:
        NoBuckets: the store has no buckets to route into.
        ProviderFailure: the provider failed on a segment.
    """
    if not store.has_buckets():
        raise NoBuckets("initialize at least one bucket before ingesting")
    buckets = list(store.pool.buckets.values())
    segments = provider.segment(experience, buckets)
    report = AdaptationReport(experience_id=experience.id)
    touched: list[tuple[str, str]] = []

    for segment in segments:
        bucket = store.pool.buckets[segment.bucket_hint] if segment.bucket_hint else None
        if bucket is None:
            bucket = provider.route(segment.text, buckets)  # type: ignore[attr-defined]
        decision = choose_path(provider, segment, bucket, config.theta_meta, config.theta_elem)
        if decision.path == PATH_ASSIMILATION:
            schema = bucket.schemas[decision.schema_id]
            element = schema.elements[decision.element_id]
            produced = apply_assimilation(
                store, segment, bucket, schema, element, experience, config, now
            )
            report.counters["assimilation"] += 1
        elif decision.path == PATH_EVOLUTION:
            schema = bucket.schemas[decision.schema_id]
            produced = apply_evolution(store, segment, bucket, schema, experience, now)
            report.counters["evolution"] += 1
        else:
            produced = apply_creation(store, segment, bucket, experience, now)
            report.counters["creation"] += 1
        schema_id = decision.schema_id if decision.path != PATH_CREATION else produced
        touched.append((bucket.id, schema_id))
        report.per_segment.append(
            SegmentOutcome(
                segment_id=segment.id,
                path=decision.path,
                bucket_id=bucket.id,
                best_schema=decision.schema_id,
                s_star=decision.s_star,
                kappa_star=decision.kappa_star,
                produced=produced,
            )
        )

    seen: set[tuple[str, str]] = set()
    for bucket_id, schema_id in touched:
        if (bucket_id, schema_id) in seen:
            continue
        seen.add((bucket_id, schema_id))
        bucket = store.pool.buckets[bucket_id]
        schema = bucket.schemas[schema_id]
        for element in schema.elements.values():
            result = resolve(
                element,
                bucket.canonical_keys,
                config.policy,
                config.weights,
                now,
                age_unit_seconds=config.age_unit_seconds,
                supports_normalization=config.supports_normalization,
                set_active=store.set_record_active,
            )
            report.conflicts_resolved += len(result.deactivated)
    return report


def sweep_theta(
    store: MemoryStore,
    provider: CognitionProvider,
    stream: Sequence[dict[str, Any]],
    thetas: Iterable[float],
    config: AdaptationConfig,
    now: datetime,
) -> list[dict[str, Any]]:
    """Re-run one experience stream at several schema thresholds.

    Each theta gets a fresh in-memory clone of the store, so runs never
    contaminate each other or the live state. Returns one summed counter
    triple per theta, in the order given.

    Raises:
        InvalidTheta: a theta outside [0, 1].
    """
    thetas = [validate_theta(t) for t in thetas]
    results = []
    for theta in thetas:
        clone = store.clone_in_memory()
        cfg = AdaptationConfig(
            theta_meta=theta,
            theta_elem=config.theta_elem,
            weights=config.weights,
            policy=config.policy,
            age_unit_seconds=config.age_unit_seconds,
            supports_normalization=config.supports_normalization,
        )
        totals = {"assimilation": 0, "evolution": 0, "creation": 0}
        conflicts = 0
        for item in stream:
            received = item.get("received_at")
            if isinstance(received, str):
                received = parse_timestamp(received)
            experience = clone.put_experience(
                item["raw_text"],
                received_at=received if isinstance(received, datetime) else now,
                source_tag=item.get("source_tag", ""),
                source_quality=item.get("source_quality", 0.5),
            )
            rep = adapt(clone, provider, experience, cfg, now)
            for key in totals:
                totals[key] += rep.counters[key]
            conflicts += rep.conflicts_resolved
        results.append({"theta": theta, "counters": totals, "conflicts_resolved": conflicts})
    return results

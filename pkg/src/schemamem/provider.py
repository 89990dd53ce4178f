"""Cognition provider: the pluggable judgment surface of the engine.

Everything subjective (segmenting raw experiences, scoring how well a
segment fits a schema or an element, deciding whether two values clash)
sits behind this contract so a model-backed provider can replace the
shipped one without touching the engine. The reference provider is fully
deterministic: sentence segmentation, term-frequency cosine scoring, and
table-driven extraction rules.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Protocol, Sequence

from .errors import EmptyExperience, ProviderFailure
from .ids import new_id
from .store import Bucket, Element, Experience, Schema
from .textsim import text_cosine, tokenize
from .values import MISSING, Value, canon_text, parse_timestamp, value_type

logger = logging.getLogger(__name__)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")

_MONTHS = {
    name: i + 1
    for i, name in enumerate(
        [
            "january", "february", "march", "april", "may", "june",
            "july", "august", "september", "october", "november", "december",
        ]
    )
}
_HUMAN_DATE = re.compile(
    r"(january|february|march|april|may|june|july|august|september|october|"
    r"november|december)\s+(\d{1,2}),?\s+(\d{4})",
    re.IGNORECASE,
)


def parse_when(text: str) -> datetime:
    """Parse a timestamp from ISO-8601 or a 'Month D, YYYY' phrase."""
    m = _HUMAN_DATE.search(text)
    if m:
        month = _MONTHS[m.group(1).lower()]
        return parse_timestamp(f"{int(m.group(3)):04d}-{month:02d}-{int(m.group(2)):02d}")
    return parse_timestamp(text)


# ---- conflict policy ----------------------------------------------------------

@dataclass
class ConflictPolicy:
    """How value disagreement is judged, per key.

    Numbers conflict when they differ by more than the key's tolerance:
    an absolute tolerance when the key is listed in ``numeric_tolerances``,
    otherwise ``default_relative_tolerance`` scaled by magnitude.
    Timestamps conflict when further apart than ``time_tolerance_seconds``.
    Strings compare by canonical (case-folded, space-collapsed) form. The
    extraction sentinel for a missing value never conflicts with anything:
    an unknown cannot contradict.
    """

    numeric_tolerances: dict[str, float] = field(default_factory=dict)
    default_relative_tolerance: float = 1e-6
    time_tolerance_seconds: float = 0.0

    def tolerance(self, key: str) -> float | None:
        """Absolute tolerance override for a key, if configured."""
        return self.numeric_tolerances.get(key)

    def value_conflict(self, key: str, a: Value, b: Value) -> bool:
        if a == MISSING or b == MISSING:
            return False
        ta, tb = value_type(a), value_type(b)
        if ta != tb:
            logger.debug("type mismatch on %r: %s vs %s", key, ta, tb)
            return False
        if ta == "number":
            tol = self.tolerance(key)
            if tol is None:
                tol = self.default_relative_tolerance * max(abs(a), abs(b))
            return abs(a - b) > tol
        if ta == "timestamp":
            return abs((a - b).total_seconds()) > self.time_tolerance_seconds
        if ta == "boolean":
            return a != b
        return canon_text(a) != canon_text(b)

    def to_json(self) -> dict[str, Any]:
        return {
            "numeric_tolerances": dict(self.numeric_tolerances),
            "default_relative_tolerance": self.default_relative_tolerance,
            "time_tolerance_seconds": self.time_tolerance_seconds,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ConflictPolicy":
        return cls(
            numeric_tolerances={k: float(v) for k, v in data.get("numeric_tolerances", {}).items()},
            default_relative_tolerance=float(data.get("default_relative_tolerance", 1e-6)),
            time_tolerance_seconds=float(data.get("time_tolerance_seconds", 0.0)),
        )


# ---- segments -------------------------------------------------------------------

@dataclass
class Segment:
    """One routed slice of an experience, ready for adaptation.

    ``entity`` is the primary-entity text used for element compatibility;
    ``missing_keys`` flags canonical keys that were filled with the sentinel.
    """

    id: str
    text: str
    experience_id: str
    extracted_meta: str
    extracted_record: dict[str, Value]
    bucket_hint: str | None = None
    entity: str = ""
    missing_keys: list[str] = field(default_factory=list)


class CognitionProvider(Protocol):
    """Contract every provider must satisfy. Scores live in [0, 1]."""

    def segment(self, experience: Experience, buckets: Sequence[Bucket]) -> list[Segment]:
        ...

    def schema_similarity(self, segment: Segment, schema: Schema) -> float:
        ...

    def element_compatibility(self, segment: Segment, element: Element) -> float:
        ...


# ---- extraction rules --------------------------------------------------------------

@dataclass
class ExtractionRules:
    """Table-driven extraction for the reference provider.

    meta_rules:   [{"regex": ..., "meta": label?}] first match wins; a rule
                  without a fixed label uses its first capture group.
    entity_rules: [{"regex": ...}] or [{"from_key": key, "title": bool}].
    key_rules:    {key: [rule, ...]} where a rule is one of
                  {"regex": ..., "type": t}            capture group, coerced
                  {"keywords": {canonical: [token..]}} token scan
                  {"from": "received_at"}              experience timestamp
    min_extracted_keys: sentences whose text yields fewer extracted keys are
                  not segments at all (filler suppression); defaults to 0.
    """

    meta_rules: list[dict[str, Any]] = field(default_factory=list)
    entity_rules: list[dict[str, Any]] = field(default_factory=list)
    key_rules: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    min_extracted_keys: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "meta_rules": self.meta_rules,
            "entity_rules": self.entity_rules,
            "key_rules": self.key_rules,
            "min_extracted_keys": self.min_extracted_keys,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ExtractionRules":
        return cls(
            meta_rules=list(data.get("meta_rules", [])),
            entity_rules=list(data.get("entity_rules", [])),
            key_rules={k: list(v) for k, v in data.get("key_rules", {}).items()},
            min_extracted_keys=int(data.get("min_extracted_keys", 0)),
        )


def _coerce(text: str, kind: str) -> Value:
    text = text.strip()
    if kind == "number":
        return int(text) if re.fullmatch(r"-?\d+", text) else float(text)
    if kind == "timestamp":
        return parse_when(text)
    if kind == "boolean":
        return text.lower() in {"true", "yes", "1"}
    return text


class LexicalProvider:
    """Deterministic reference provider.

    Segmentation is sentence-boundary based; each sentence routes to the
    bucket whose centric_info is most TF-cosine-similar (ties to the lowest
    bucket id). Schema similarity compares meta texts, element compatibility
    compares the segment's primary entity against the element label.
    """

    single_flight = False  # stateless, safe under concurrent calls

    def __init__(self, rules: ExtractionRules | None = None):
        self.rules = rules or ExtractionRules()

    # -- routing --

    def route(self, text: str, buckets: Sequence[Bucket]) -> Bucket:
        best: Bucket | None = None
        best_score = -1.0
        for bucket in sorted(buckets, key=lambda b: b.id):
            score = text_cosine(text, bucket.centric_info)
            if score > best_score:
                best, best_score = bucket, score
        assert best is not None, "route() requires at least one bucket"
        return best

    # -- extraction --

    def _extract_meta(self, sentence: str) -> str:
        for rule in self.rules.meta_rules:
            m = re.search(rule["regex"], sentence, re.IGNORECASE)
            if m:
                label = rule.get("meta")
                if label is None:
                    label = m.group(1) if m.groups() else m.group(0)
                return label
        tokens = tokenize(sentence)
        for tok in tokens:
            if tok.isalpha():
                return tok.title()
        return tokens[0].title() if tokens else "General"

    def _extract_key(self, sentence: str, exp: Experience, rules: list[dict[str, Any]]) -> tuple[Value | None, bool]:
        """Returns (value, from_text); value None when nothing matched."""
        tokens = set(tokenize(sentence))
        for rule in rules:
            if "regex" in rule:
                m = re.search(rule["regex"], sentence, re.IGNORECASE)
                if m:
                    captured = m.group(1) if m.groups() else m.group(0)
                    return _coerce(captured, rule.get("type", "string")), True
            elif "keywords" in rule:
                for canonical, synonyms in rule["keywords"].items():
                    if any(s.lower() in tokens for s in synonyms):
                        return canonical, True
            elif rule.get("from") == "received_at":
                return exp.received_at, False
        return None, False

    def _extract_entity(self, sentence: str, record: dict[str, Value], bucket: Bucket, meta: str) -> str:
        for rule in self.rules.entity_rules:
            if "regex" in rule:
                m = re.search(rule["regex"], sentence)
                if m:
                    return m.group(1) if m.groups() else m.group(0)
            elif "from_key" in rule:
                val = record.get(rule["from_key"])
                if val is not None and val != MISSING and isinstance(val, str):
                    return val.title() if rule.get("title") else val
        first_key = bucket.canonical_keys[0]
        val = record.get(first_key)
        if isinstance(val, str) and val != MISSING:
            return val.title()
        return meta

    # -- contract ops --

    def segment(self, experience: Experience, buckets: Sequence[Bucket]) -> list[Segment]:
        if not experience.raw_text.strip():
            raise EmptyExperience("cannot segment an empty experience")
        if not buckets:
            raise ProviderFailure("no buckets to route segments into")
        try:
            sentences = [s.strip() for s in _SENTENCE_SPLIT.split(experience.raw_text)]
            sentences = [s for s in sentences if s]
            segments: list[Segment] = []
            for sentence in sentences:
                bucket = self.route(sentence, buckets)
                meta = self._extract_meta(sentence)
                record: dict[str, Value] = {}
                missing: list[str] = []
                from_text = 0
                for key in bucket.declared_keys():
                    rules = self.rules.key_rules.get(key)
                    if rules:
                        value, was_text = self._extract_key(sentence, experience, rules)
                    else:
                        value, was_text = None, False
                    if value is None:
                        if key in bucket.canonical_keys:
                            record[key] = MISSING
                            missing.append(key)
                    else:
                        record[key] = value
                        if was_text:
                            from_text += 1
                if self.rules.key_rules and from_text < self.rules.min_extracted_keys:
                    continue
                entity = self._extract_entity(sentence, record, bucket, meta)
                segments.append(
                    Segment(
                        id=new_id("seg"),
                        text=sentence,
                        experience_id=experience.id,
                        extracted_meta=meta,
                        extracted_record=record,
                        bucket_hint=bucket.id,
                        entity=entity,
                        missing_keys=missing,
                    )
                )
            return segments
        except (EmptyExperience, ProviderFailure):
            raise
        except Exception as exc:
            raise ProviderFailure(f"extraction failed: {exc}") from exc

    def schema_similarity(self, segment: Segment, schema: Schema) -> float:
        return text_cosine(segment.extracted_meta, schema.meta)

    def element_compatibility(self, segment: Segment, element: Element) -> float:
        return text_cosine(segment.entity, element.label)

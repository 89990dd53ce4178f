"""High-level facade over the store, provider, adaptation, and retrieval.

One MemoryEngine owns one store (persistent when given a root directory,
in-memory otherwise). The goal spec used at init time is kept as a sidecar
JSON file next to the log so extraction rules survive restarts.
"""

from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable

from .adaptation import AdaptationConfig, AdaptationReport, adapt, sweep_theta
from .config import Settings
from .goals import GoalSpec, initialize, load_goal_spec
from .provider import CognitionProvider, LexicalProvider
from .query import ResultTable, evaluate, parse
from .retrieval import Answer, RetrievalOrchestrator
from .store import MemoryStore, SnapshotHandle
from .values import parse_timestamp

log = logging.getLogger(__name__)

GOAL_SIDECAR = "goal.json"


class MemoryEngine:
    """Facade: init, ingest, answer, query, sweep, inspect."""

    def __init__(
        self,
        root: str | Path | None = None,
        settings: Settings | None = None,
        provider: CognitionProvider | None = None,
        now_fn: Callable[[], datetime] | None = None,
    ):
        self.settings = settings or Settings()
        self.root = Path(root) if root is not None else None
        self.store = MemoryStore(self.root)
        self.goal: GoalSpec | None = None
        if self.root is not None:
            sidecar = self.root / GOAL_SIDECAR
            if sidecar.exists():
                self.goal = load_goal_spec(sidecar)
        if now_fn is not None:
            self._now_fn = now_fn
        elif self.settings.now is not None:
            fixed = self.settings.now
            self._now_fn = lambda: fixed
        else:
            self._now_fn = lambda: datetime.now(timezone.utc)
        self.provider: CognitionProvider = provider or LexicalProvider(self._rules())
        self._orchestrator = RetrievalOrchestrator(
            pool_fn=lambda: self.store.pool,
            retrieval_k=self.settings.retrieval_k,
            budget=self.settings.budget,
            now_fn=self._now_fn,
        )

    def _rules(self):
        if self.goal is not None and self.goal.extraction is not None:
            return self.goal.extraction
        return self.settings.extraction_rules

    def _config(self) -> AdaptationConfig:
        return self.settings.adaptation_config()

    def now(self) -> datetime:
        return self._now_fn()

    # -- lifecycle --

    def init(self, spec: GoalSpec | dict[str, Any] | str | Path) -> dict[str, Any]:
        """Initialize an empty store from a goal spec; returns the layout."""
        goal = spec if isinstance(spec, GoalSpec) else load_goal_spec(spec)
        summary = initialize(self.store, goal, now=self.now())
        self.goal = goal
        if self.root is not None:
            sidecar = self.root / GOAL_SIDECAR
            sidecar.write_text(
                json.dumps(goal.to_json(), indent=2, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )
        if isinstance(self.provider, LexicalProvider):
            self.provider = LexicalProvider(self._rules())
        return summary

    def initialized(self) -> bool:
        return bool(self.store.pool.buckets)

    # -- ingestion --

    def ingest(
        self,
        raw_text: str,
        source_tag: str = "user",
        source_quality: float = 1.0,
        received_at: datetime | None = None,
    ) -> AdaptationReport:
        """Store one experience and run the adaptation pass over it."""
        experience = self.store.put_experience(
            raw_text=raw_text,
            source_tag=source_tag,
            source_quality=source_quality,
            received_at=received_at or self.now(),
        )
        report = adapt(self.store, self.provider, experience, self._config(), now=self.now())
        log.info(
            "ingested %s: %d segments, %d conflicts resolved",
            experience.id,
            len(report.per_segment),
            report.conflicts_resolved,
        )
        return report

    def ingest_many(self, items: Iterable[dict[str, Any]]) -> list[AdaptationReport]:
        reports = []
        for item in items:
            received = item.get("received_at")
            if isinstance(received, str):
                received = parse_timestamp(received)
            reports.append(
                self.ingest(
                    raw_text=item["raw_text"],
                    source_tag=item.get("source_tag", "user"),
                    source_quality=float(item.get("source_quality", 1.0)),
                    received_at=received,
                )
            )
        return reports

    # -- read paths --

    def answer(self, question: str, budget: int | None = None) -> Answer:
        return self._orchestrator.answer(question, budget=budget)

    def query(self, text: str) -> ResultTable:
        return evaluate(parse(text), self.store.pool)

    def sweep(self, stream: list[dict[str, Any]], thetas: list[float]) -> list[dict[str, Any]]:
        return sweep_theta(self.store, self.provider, stream, thetas, self._config(), now=self.now())

    def record(self, record_id: str) -> dict[str, Any]:
        bucket, schema, element, record = self.store.find_record(record_id)
        out = record.to_json()
        out.update(
            {
                "bucket_id": bucket.id,
                "schema_id": schema.id,
                "element_id": element.id,
                "element_label": element.label,
                "schema_meta": schema.meta,
            }
        )
        return out

    def inspect(self) -> dict[str, Any]:
        """Layout and size summary of the current pool."""
        pool = self.store.pool
        buckets = []
        for bucket in sorted(pool.buckets.values(), key=lambda b: b.id):
            n_elements = sum(len(s.elements) for s in bucket.schemas.values())
            n_records = n_active = 0
            for schema in bucket.schemas.values():
                for element in schema.elements.values():
                    n_records += len(element.records)
                    n_active += sum(1 for r in element.records if r.active)
            buckets.append(
                {
                    "id": bucket.id,
                    "name": bucket.name,
                    "centric_info": bucket.centric_info,
                    "canonical_keys": list(bucket.canonical_keys),
                    "optional_keys": list(bucket.optional_keys),
                    "schemas": len(bucket.schemas),
                    "elements": n_elements,
                    "records": n_records,
                    "active_records": n_active,
                }
            )
        return {
            "version": self.store.version,
            "experiences": len(pool.experiences),
            "buckets": buckets,
        }

    def snapshot(self) -> SnapshotHandle:
        return self.store.snapshot()

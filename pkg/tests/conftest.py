"""Shared fixtures: fixed clocks, canned goal specs, prebuilt engines."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from schemamem import MemoryEngine, Settings
from schemamem.evalharness import generate
from schemamem.store import MemoryStore

NOW = datetime(2024, 6, 1, 12, 0, 0, tzinfo=timezone.utc)


RESIDENCE_SPEC = {
    "name": "people",
    "description": "who lives where",
    "buckets": [
        {
            "name": "residence",
            "centric_info": "where a person lives, their city and move date",
            "canonical_keys": ["person", "city"],
            "optional_keys": ["since"],
            "schemas": [{"meta": "Residence facts", "elements": ["Ada"]}],
        }
    ],
    "extraction": {
        "meta_rules": [{"regex": r"\blives?\b", "meta": "Residence facts"}],
        "entity_rules": [{"from_key": "person", "title": True}],
        "key_rules": {
            "person": [{"regex": r"^([A-Z][a-z]+)", "type": "string"}],
            "city": [{"regex": r"\bin ([A-Z][A-Za-z ]+?)(?:\.|$)", "type": "string"}],
            "since": [{"regex": r"\bsince (\d{4}-\d{2}-\d{2})\b", "type": "timestamp"}],
        },
    },
}


@pytest.fixture
def now():
    return NOW


@pytest.fixture
def clock(now):
    return lambda: now


@pytest.fixture
def store(tmp_path):
    return MemoryStore(tmp_path / "store")


@pytest.fixture
def mem_store():
    return MemoryStore(None)


@pytest.fixture
def engine(tmp_path, clock):
    return MemoryEngine(tmp_path / "engine", settings=Settings(), now_fn=clock)


@pytest.fixture
def residence_engine(engine):
    engine.init(RESIDENCE_SPEC)
    return engine


@pytest.fixture(scope="session")
def market_suite():
    return generate(seed=7, n_questions=50)


def ts(day: int, hour: int = 0) -> datetime:
    """Shorthand timestamp inside the fixed test month."""
    return datetime(2024, 5, day, hour, tzinfo=timezone.utc)


def back(days: float) -> datetime:
    return NOW - timedelta(days=days)

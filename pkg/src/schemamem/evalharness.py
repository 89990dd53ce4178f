"""Synthetic evaluation: suite generation, scoring, and a retrieval-only baseline.

A suite ("suite/1") is fully self-contained: the goal spec (with extraction
rules), the dialogue turns, and the questions with gold answers computed by
brute force over the hidden value table. The engine never sees the table;
it only reads the dialogue. Scoring checks numeric agreement within a fixed
tolerance plus evidence coverage: every gold-contributing turn must be
reachable from the answer's evidence ids.

The sweep stream builder lives here too. It constructs experiences whose
best schema similarity sits at known constant levels, so adaptation-path
counts respond to the meta threshold in a provably monotone way.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any

from .errors import ConfigInvalid, EngineUnreachable, MemoryError_, NonEmptyStore
from .ids import id_kind
from .provider import parse_when
from .textsim import text_cosine
from .values import parse_timestamp

log = logging.getLogger(__name__)

SUITE_FORMAT = "suite/1"
SCORE_TOLERANCE = 1e-6

_ENTITY_POOL = ["NFLX", "VRTX", "KLAC", "ADBE", "CSCO", "ORCL", "AMAT", "REGN"]
_MONTH_NAME = "April"
_YEAR = 2024
_MONTH = 4
_DAYS = 30

_FILLER_TURNS = [
    "Noted, thanks for keeping me posted.",
    "Got it, let us continue.",
    "Understood, please go on.",
]

# value-bearing turn: "On April 3, 2024, the close for NFLX was 123.45."
_TURN_TEMPLATE = "On {month} {day}, {year}, the {metric} for {entity} was {value:.2f}."


def _market_goal_spec(metric: str) -> dict[str, Any]:
    return {
        "name": "market-memory",
        "description": "daily metric series for tracked tickers",
        "buckets": [
            {
                "name": "market",
                "centric_info": f"daily {metric} series for tracked tickers",
                "canonical_keys": ["entity"],
                "optional_keys": ["date", metric],
                "schemas": [{"meta": f"{metric.title()} series", "elements": []}],
            }
        ],
        "extraction": {
            "meta_rules": [{"regex": rf"\b{metric}\b", "meta": f"{metric.title()} series"}],
            "entity_rules": [{"regex": r"\bfor ([A-Z]{2,5}) was\b"}],
            "key_rules": {
                "entity": [{"regex": r"\bfor ([A-Z]{2,5}) was\b", "type": "string"}],
                "date": [{"regex": r"\bOn ([A-Za-z]+ \d{1,2}, \d{4})\b", "type": "timestamp"}],
                metric: [{"regex": r"\bwas (-?\d+(?:\.\d+)?)", "type": "number"}],
            },
            "min_extracted_keys": 2,
        },
    }


def _brute(fn: str, values: list[float]) -> float | int | None:
    """Independent gold computation: plain python over the hidden table."""
    if fn == "count":
        return len(values)
    if not values:
        return None
    if fn == "sum":
        return sum(values)
    if fn == "avg":
        return sum(values) / len(values)
    if fn == "max":
        return max(values)
    return min(values)


_EASY_TEXT = {
    "max": "What was the highest {metric} for {entity} between {d1} and {d2}?",
    "min": "What was the lowest {metric} for {entity} between {d1} and {d2}?",
    "avg": "What was the average {metric} for {entity} between {d1} and {d2}?",
    "sum": "What was the total {metric} for {entity} between {d1} and {d2}?",
    "count": "How many {metric} entries do we have for {entity} between {d1} and {d2}?",
}

_HARD_TEXT = (
    "Did {entity} have a higher total {metric} between {a1} and {a2} "
    "than between {b1} and {b2}, and by how much?"
)


def _iso(day: int) -> str:
    return f"{_YEAR:04d}-{_MONTH:02d}-{day:02d}"


def generate(seed: int = 7, n_questions: int = 50, metric: str = "close") -> dict[str, Any]:
    """Build a deterministic suite: 30% easy, 50% medium, 20% hard.

    Easy spans cover at most 7 records, medium 8 to 31, hard is the
    difference of two disjoint range sums. Values are strictly positive so
    any answer computed from a proper subset of a range undershoots; that
    makes shallow retrieval provably insufficient on hard questions.
    """
    if n_questions < 10:
        raise ValueError("n_questions must be >= 10")
    rng = random.Random(seed)
    entities = rng.sample(_ENTITY_POOL, 3)
    table: dict[tuple[str, int], float] = {}
    for day in range(1, _DAYS + 1):
        for entity in entities:
            table[(entity, day)] = round(rng.uniform(20.0, 480.0), 2)

    dialogue: list[dict[str, Any]] = []
    turn_of: dict[tuple[str, int], int] = {}
    received = datetime(_YEAR, 5, 1, tzinfo=timezone.utc)
    i = 0
    for day in range(1, _DAYS + 1):
        for entity in entities:
            text = _TURN_TEMPLATE.format(
                month=_MONTH_NAME,
                day=day,
                year=_YEAR,
                metric=metric,
                entity=entity,
                value=table[(entity, day)],
            )
            turn_of[(entity, day)] = len(dialogue)
            dialogue.append(
                {
                    "turn_index": len(dialogue),
                    "text": text,
                    "received_at": (received + timedelta(minutes=i)).isoformat(),
                }
            )
            i += 1
            if i % 9 == 0:
                dialogue.append(
                    {
                        "turn_index": len(dialogue),
                        "text": _FILLER_TURNS[(i // 9) % len(_FILLER_TURNS)],
                        "received_at": (received + timedelta(minutes=i)).isoformat(),
                    }
                )

    n_easy = round(n_questions * 0.3)
    n_hard = round(n_questions * 0.2)
    n_medium = n_questions - n_easy - n_hard
    fns = ["max", "min", "avg", "sum", "count"]

    def span_question(qid: str, difficulty: str, span_lo: int, span_hi: int) -> dict[str, Any]:
        entity = rng.choice(entities)
        span = rng.randint(span_lo, span_hi)
        d1 = rng.randint(1, _DAYS - span + 1)
        d2 = d1 + span - 1
        fn = rng.choice(fns)
        days = list(range(d1, d2 + 1))
        gold = _brute(fn, [table[(entity, d)] for d in days])
        return {
            "id": qid,
            "difficulty": difficulty,
            "question": _EASY_TEXT[fn].format(
                metric=metric, entity=entity, d1=_iso(d1), d2=_iso(d2)
            ),
            "gold": {
                "value": gold,
                "descriptors": [{"turn_index": turn_of[(entity, d)]} for d in days],
            },
        }

    def hard_question(qid: str) -> dict[str, Any]:
        entity = rng.choice(entities)
        s1 = rng.randint(5, 12)
        s2 = rng.randint(5, 12)
        a1 = rng.randint(1, _DAYS - (s1 + s2) - 1)
        a2 = a1 + s1 - 1
        b1 = rng.randint(a2 + 1, _DAYS - s2 + 1)
        b2 = b1 + s2 - 1
        first = [table[(entity, d)] for d in range(a1, a2 + 1)]
        second = [table[(entity, d)] for d in range(b1, b2 + 1)]
        gold = _brute("sum", first) - _brute("sum", second)
        days = list(range(a1, a2 + 1)) + list(range(b1, b2 + 1))
        return {
            "id": qid,
            "difficulty": "hard",
            "question": _HARD_TEXT.format(
                entity=entity, metric=metric, a1=_iso(a1), a2=_iso(a2), b1=_iso(b1), b2=_iso(b2)
            ),
            "gold": {
                "value": gold,
                "descriptors": [{"turn_index": turn_of[(entity, d)]} for d in days],
            },
        }

    questions: list[dict[str, Any]] = []
    for j in range(n_easy):
        questions.append(span_question(f"q{len(questions):03d}", "easy", 3, 7))
    for j in range(n_medium):
        questions.append(span_question(f"q{len(questions):03d}", "medium", 8, 30))
    for j in range(n_hard):
        questions.append(hard_question(f"q{len(questions):03d}"))

    return {
        "format": SUITE_FORMAT,
        "seed": seed,
        "tolerance": SCORE_TOLERANCE,
        "goal_spec": _market_goal_spec(metric),
        "hidden_table": {f"{ent}|{day}": value for (ent, day), value in table.items()},
        "dialogue": dialogue,
        "questions": questions,
    }


def load_suite(source: str | Path | dict[str, Any]) -> dict[str, Any]:
    """Load and format-check a suite from a dict or a JSON file."""
    if isinstance(source, dict):
        suite = source
    else:
        path = Path(source)
        try:
            suite = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot load suite from {path}: {exc}") from exc
    if suite.get("format") != SUITE_FORMAT:
        raise ConfigInvalid(f"unsupported suite format: {suite.get('format')!r}")
    return suite


# ---- scoring ----------------------------------------------------------------------

@dataclass
class _Target:
    """Uniform access to an engine, in-process or over HTTP."""

    engine: Any = None
    client: Any = None

    def init(self, goal_spec: dict[str, Any]) -> None:
        if self.engine is not None:
            self.engine.init(goal_spec)
            return
        resp = self.client.post("/v1/init", json=goal_spec)
        if resp.status_code == 409:
            raise NonEmptyStore("service store is not fresh")
        resp.raise_for_status()

    def ingest(self, turn: dict[str, Any]) -> str:
        if self.engine is not None:
            report = self.engine.ingest(
                raw_text=turn["text"],
                source_tag="dialogue",
                received_at=_parse_received(turn["received_at"]),
            )
            return report.experience_id
        resp = self.client.post(
            "/v1/experiences",
            json={
                "raw_text": turn["text"],
                "source_tag": "dialogue",
                "received_at": turn["received_at"],
            },
        )
        resp.raise_for_status()
        return resp.json()["experience_id"]

    def answer(self, question: str) -> dict[str, Any]:
        if self.engine is not None:
            return self.engine.answer(question).to_json()
        resp = self.client.post("/v1/answer", json={"question": question})
        resp.raise_for_status()
        return resp.json()

    def experience_of_record(self, record_id: str) -> str | None:
        if self.engine is not None:
            try:
                return self.engine.store.find_record(record_id)[3].experience_id
            except MemoryError_:
                return None
        resp = self.client.get(f"/v1/records/{record_id}")
        if resp.status_code != 200:
            return None
        return resp.json().get("experience_id")


def _parse_received(raw: str) -> datetime:
    return parse_timestamp(raw)


def _correct(gold_value: Any, answer: dict[str, Any], tolerance: float) -> bool:
    if answer.get("abstained"):
        return False
    value = answer.get("value")
    if value is None:
        return False
    try:
        return math.isclose(float(value), float(gold_value), rel_tol=0.0, abs_tol=tolerance)
    except (TypeError, ValueError):
        return False


def run(
    suite: dict[str, Any],
    engine: Any = None,
    endpoint: str | None = None,
) -> dict[str, Any]:
    """Ingest the dialogue and score every question against gold.

    Exactly one of ``engine`` (a fresh MemoryEngine) or ``endpoint`` (base
    URL of a fresh service) must be given.

    Raises:
        EngineUnreachable: the endpoint cannot be reached.
        NonEmptyStore: the target already holds data.
    """
    if (engine is None) == (endpoint is None):
        raise ValueError("pass exactly one of engine or endpoint")
    tolerance = float(suite.get("tolerance", SCORE_TOLERANCE))
    client = None
    if endpoint is not None:
        import httpx

        client = httpx.Client(base_url=endpoint.rstrip("/"), timeout=60.0)
    target = _Target(engine=engine, client=client)
    try:
        try:
            target.init(suite["goal_spec"])
            exp_of_turn: dict[int, str] = {}
            for turn in suite["dialogue"]:
                exp_of_turn[turn["turn_index"]] = target.ingest(turn)
        except Exception as exc:
            if client is not None and _is_transport_error(exc):
                raise EngineUnreachable(f"cannot reach {endpoint}: {exc}") from exc
            raise

        record_cache: dict[str, str | None] = {}

        def evidence_experiences(evidence: list[str]) -> set[str]:
            out: set[str] = set()
            for eid in evidence:
                kind = id_kind(eid)
                if kind == "exp":
                    out.add(eid)
                elif kind == "rec":
                    if eid not in record_cache:
                        record_cache[eid] = target.experience_of_record(eid)
                    if record_cache[eid]:
                        out.add(record_cache[eid])
            return out

        per_question: list[dict[str, Any]] = []
        by_difficulty: dict[str, list[bool]] = {}
        coverages: list[float] = []
        n_abstained = 0
        for q in suite["questions"]:
            answer = target.answer(q["question"])
            ok = _correct(q["gold"]["value"], answer, tolerance)
            seen = evidence_experiences(answer.get("evidence", []))
            descriptors = q["gold"]["descriptors"]
            covered = sum(
                1 for d in descriptors if exp_of_turn.get(d["turn_index"]) in seen
            )
            coverage = covered / len(descriptors) if descriptors else 1.0
            coverages.append(coverage)
            if answer.get("abstained"):
                n_abstained += 1
            by_difficulty.setdefault(q["difficulty"], []).append(ok)
            per_question.append(
                {
                    "id": q["id"],
                    "difficulty": q["difficulty"],
                    "correct": ok,
                    "coverage": coverage,
                    "value": answer.get("value"),
                    "gold": q["gold"]["value"],
                    "abstained": bool(answer.get("abstained")),
                }
            )
        results = [p["correct"] for p in per_question]
        return {
            "n": len(results),
            "accuracy": sum(results) / len(results) if results else 0.0,
            "coverage": sum(coverages) / len(coverages) if coverages else 0.0,
            "abstained": n_abstained,
            "per_difficulty": {
                d: sum(v) / len(v) for d, v in sorted(by_difficulty.items())
            },
            "per_question": per_question,
        }
    finally:
        if client is not None:
            client.close()


def _is_transport_error(exc: Exception) -> bool:
    try:
        import httpx
    except ImportError:  # pragma: no cover
        return False
    return isinstance(exc, httpx.TransportError)


# ---- retrieval-only baseline ------------------------------------------------------

_BASE_VALUE = re.compile(r"\bwas (-?\d+(?:\.\d+)?)\.")
_BASE_ENTITY = re.compile(r"\bfor ([A-Z]{2,5}) was\b")
_BASE_DATE = re.compile(r"\bOn ([A-Za-z]+ \d{1,2}, \d{4})\b")
_BASE_RANGE = re.compile(
    r"(?:between|from)\s+(\d{4}-\d{2}-\d{2})\s+(?:and|to)\s+(\d{4}-\d{2}-\d{2})", re.IGNORECASE
)
_BASE_FNS = [
    ("avg", r"\baverage\b|\bmean\b"),
    ("count", r"\bhow many\b|\bcount\b|\bnumber of\b"),
    ("max", r"\bhighest\b|\bmaximum\b|\blargest\b"),
    ("min", r"\blowest\b|\bminimum\b|\bsmallest\b"),
    ("sum", r"\btotal\b|\bsum\b"),
]


def vector_baseline(suite: dict[str, Any], k: int = 5) -> dict[str, Any]:
    """Retrieve-then-read baseline with no structured memory.

    Ranks dialogue turns by TF-cosine against the question, reads values out
    of the top k turns only, and applies the asked aggregate. Whatever the
    top k misses is simply absent, so questions whose gold spans more than
    k records cannot be answered reliably.
    """
    turns = suite["dialogue"]
    parsed: list[tuple[str | None, datetime | None, float | None]] = []
    for turn in turns:
        text = turn["text"]
        ent = _BASE_ENTITY.search(text)
        date = _BASE_DATE.search(text)
        value = _BASE_VALUE.search(text)
        parsed.append(
            (
                ent.group(1) if ent else None,
                parse_when(date.group(1)) if date else None,
                float(value.group(1)) if value else None,
            )
        )

    tolerance = float(suite.get("tolerance", SCORE_TOLERANCE))
    by_difficulty: dict[str, list[bool]] = {}
    results: list[bool] = []
    for q in suite["questions"]:
        question = q["question"]
        scored = sorted(
            range(len(turns)),
            key=lambda idx: (-text_cosine(question, turns[idx]["text"]), idx),
        )[:k]
        fn = next((name for name, pat in _BASE_FNS if re.search(pat, question.lower())), None)
        ranges = [
            (
                parse_when(m.group(1)),
                parse_when(m.group(2)),
            )
            for m in _BASE_RANGE.finditer(question)
        ]
        entity = None
        m = re.search(r"\b(?:for|Did) ([A-Z]{2,5})\b", question)
        if m:
            entity = m.group(1)
        value: float | int | None = None
        if fn and ranges and entity:
            def in_range(date: datetime | None, span: tuple[datetime, datetime]) -> bool:
                return date is not None and span[0] <= date <= span[1]

            if len(ranges) >= 2 and re.search(r"\bthan\b", question.lower()):
                first = [
                    parsed[i][2]
                    for i in scored
                    if parsed[i][0] == entity and in_range(parsed[i][1], ranges[0])
                    and parsed[i][2] is not None
                ]
                second = [
                    parsed[i][2]
                    for i in scored
                    if parsed[i][0] == entity and in_range(parsed[i][1], ranges[1])
                    and parsed[i][2] is not None
                ]
                a = _brute(fn, first)
                b = _brute(fn, second)
                value = a - b if a is not None and b is not None else None
            else:
                hits = [
                    parsed[i][2]
                    for i in scored
                    if parsed[i][0] == entity and in_range(parsed[i][1], ranges[0])
                    and parsed[i][2] is not None
                ]
                value = _brute(fn, hits)
        ok = (
            value is not None
            and math.isclose(float(value), float(q["gold"]["value"]), rel_tol=0.0, abs_tol=tolerance)
        )
        results.append(ok)
        by_difficulty.setdefault(q["difficulty"], []).append(ok)
    return {
        "n": len(results),
        "accuracy": sum(results) / len(results) if results else 0.0,
        "per_difficulty": {d: sum(v) / len(v) for d, v in sorted(by_difficulty.items())},
    }


# ---- sweep stream -------------------------------------------------------------------

# (token, repeats, fillers) -> best schema similarity repeats/sqrt(repeats^2+fillers)
_LEVELS = [
    ("alpha", 1, 0),
    ("bravo", 3, 1),
    ("charlie", 1, 1),
    ("delta", 1, 2),
    ("echo", 1, 4),
    ("foxtrot", 1, 12),
]


def level_constants() -> list[float]:
    return [a / math.sqrt(a * a + m) for _, a, m in _LEVELS]


def make_sweep_stream(seed: int = 11, n: int = 200) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    """Goal spec plus an experience stream with known similarity levels.

    Each experience is one sentence built from a level token (repeated) and
    globally unique filler tokens. Against the pre-seeded single-token
    template schemas, its best similarity is exactly the level constant;
    schemas created along the way can never score higher than that constant,
    so the chosen path depends on the threshold alone. Raising the meta
    threshold can therefore only move experiences from the assimilation and
    evolution paths into creation, never the other way.
    """
    rng = random.Random(seed)
    goal_spec = {
        "name": "sweep-fixture",
        "buckets": [
            {
                "name": "notes",
                "centric_info": "leveled note stream",
                "canonical_keys": ["entity"],
                "optional_keys": [],
                "schemas": [{"meta": token, "elements": []} for token, _, _ in _LEVELS],
            }
        ],
        "extraction": {
            "meta_rules": [{"regex": r"^(.*)$"}],
            "entity_rules": [{"regex": r"^([a-z]+)"}],
            "key_rules": {"entity": [{"regex": r"^([a-z]+)", "type": "string"}]},
            "min_extracted_keys": 1,
        },
    }
    assignments = [i % len(_LEVELS) for i in range(n)]
    rng.shuffle(assignments)
    base = datetime(2024, 3, 1, tzinfo=timezone.utc)
    stream: list[dict[str, Any]] = []
    filler_counter = 0
    for i, level in enumerate(assignments):
        token, repeats, fillers = _LEVELS[level]
        words = [token] * repeats
        for _ in range(fillers):
            words.append(f"u{filler_counter:05d}")
            filler_counter += 1
        stream.append(
            {
                "raw_text": " ".join(words) + ".",
                "source_tag": "sweep",
                "source_quality": 1.0,
                "received_at": (base + timedelta(seconds=i)).isoformat(),
            }
        )
    return goal_spec, stream

"""Question answering over the memory pool.

Questions are classified into three strategies:

* RegionalFact: a single retrieve step; the best-matching experience is
  the answer.
* MultiFragment: retrieve for context, then structured queries over the
  elements the question mentions.
* Aggregation: structured queries per time range, combined arithmetically
  when the question compares two ranges.

Execution is a bounded plan-act-observe loop. Every tool invocation lands
in the trace; when the plan cannot finish within the step budget, or a
needed piece is missing, the engine abstains instead of erroring. Numeric
answers stay recomputable from their evidence: re-running the traced query
steps restricted to the evidence records yields the same value.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any, Callable, Sequence

from .errors import EmptyQuestion, EmptyStore, MemoryError_
from .query import StructuredQuery, Predicate, SelectItem, ResultTable, calculate, evaluate, parse, print_query
from .store import Bucket, MemoryPool
from .textsim import text_cosine, tokenize
from .values import MISSING, value_type

CLASS_REGIONAL = "RegionalFact"
CLASS_MULTI = "MultiFragment"
CLASS_AGG = "Aggregation"

ABSTAIN_TEXT = "I do not have enough remembered information to answer that."

_AGG_PATTERNS = [
    r"\bhow (?:many|much)\b",
    r"\btotal\b",
    r"\bsum\b",
    r"\baverage\b",
    r"\bmean\b",
    r"\bcount\b",
    r"\bdifference\b",
    r"\b(?:highest|lowest|maximum|minimum|largest|smallest)\b",
    r"\b(?:more|less|fewer|higher|lower|greater)\b.*\bthan\b",
]
_MULTI_PATTERNS = [r"\bbased on\b", r"\bpreferences?\b"]

_ISO_RANGE = re.compile(
    r"(?:between|from)\s+(\d{4}-\d{2}-\d{2})\s+(?:and|to)\s+(\d{4}-\d{2}-\d{2})",
    re.IGNORECASE,
)

_FN_RULES = [
    ("avg", r"\baverage\b|\bmean\b"),
    ("count", r"\bhow many\b|\bcount\b|\bnumber of\b"),
    ("max", r"\bhighest\b|\bmaximum\b|\blargest\b"),
    ("min", r"\blowest\b|\bminimum\b|\bsmallest\b"),
    ("sum", r"\btotal\b|\bsum\b"),
]

_DIFF_PATTERN = re.compile(
    r"\b(?:more|less|fewer|higher|lower|greater)\b.*\bthan\b|\bdifference\b", re.IGNORECASE
)


def classify(question: str) -> str:
    """Deterministic rule-based strategy choice.

    Raises:
        EmptyQuestion: blank input.
    """
    if not question or not question.strip():
        raise EmptyQuestion("question is empty")
    low = question.lower()
    for pattern in _AGG_PATTERNS:
        if re.search(pattern, low):
            return CLASS_AGG
    for pattern in _MULTI_PATTERNS:
        if re.search(pattern, low):
            return CLASS_MULTI
    return CLASS_REGIONAL


@dataclass
class ToolStep:
    index: int
    tool: str
    args: dict[str, Any]
    observation: Any
    elapsed: float

    def to_json(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "tool": self.tool,
            "args": self.args,
            "observation": self.observation,
            "elapsed": self.elapsed,
        }


@dataclass
class Answer:
    text: str
    value: int | float | None
    evidence: list[str]
    trace: list[ToolStep] = field(default_factory=list)
    abstained: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "value": self.value,
            "evidence": list(self.evidence),
            "abstained": self.abstained,
            "trace": [s.to_json() for s in self.trace],
        }


def retrieve_experiences(pool: MemoryPool, question: str, k: int) -> list[dict[str, Any]]:
    """Top-k experiences by TF-cosine against the question; ties by id.

    Raises:
        EmptyStore: no experiences ingested yet.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not pool.experiences:
        raise EmptyStore("no experiences to retrieve from")
    scored = [
        (text_cosine(question, exp.raw_text), exp)
        for exp in pool.experiences.values()
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1].id))
    return [
        {"experience_id": exp.id, "score": score, "text": exp.raw_text}
        for score, exp in scored[:k]
    ]


class InProcessTools:
    """Default tool runner: direct calls against a live pool."""

    def __init__(self, pool_fn: Callable[[], MemoryPool], retrieval_k: int = 5):
        self._pool_fn = pool_fn
        self.retrieval_k = retrieval_k

    def retrieve(self, question: str, k: int) -> list[dict[str, Any]]:
        return retrieve_experiences(self._pool_fn(), question, k)

    def query(self, text: str) -> dict[str, Any]:
        table = evaluate(parse(text), self._pool_fn())
        return table.to_json()

    def calculate(self, expr: str, env: dict[str, Any]) -> Any:
        return calculate(expr, env)


# ---- time phrases ---------------------------------------------------------------

def _day_span(day: datetime) -> tuple[datetime, datetime]:
    start = day.replace(hour=0, minute=0, second=0, microsecond=0)
    return start, start + timedelta(days=1) - timedelta(microseconds=1)


def _phrase_ranges(text: str, now: datetime) -> list[tuple[datetime, datetime]]:
    """Resolve relative time phrases against a fixed now, in text order."""
    low = text.lower()
    found: list[tuple[int, tuple[datetime, datetime]]] = []
    monday = (now - timedelta(days=now.weekday())).replace(
        hour=0, minute=0, second=0, microsecond=0
    )
    month_start = now.replace(day=1, hour=0, minute=0, second=0, microsecond=0)
    phrases: dict[str, tuple[datetime, datetime]] = {
        "this week": (monday, monday + timedelta(days=7) - timedelta(microseconds=1)),
        "last week": (monday - timedelta(days=7), monday - timedelta(microseconds=1)),
        "this month": (month_start, _month_end(month_start)),
        "last month": (_prev_month_start(month_start), month_start - timedelta(microseconds=1)),
        "today": _day_span(now),
        "yesterday": _day_span(now - timedelta(days=1)),
    }
    for phrase, span in phrases.items():
        for m in re.finditer(re.escape(phrase), low):
            found.append((m.start(), span))
    found.sort(key=lambda pair: pair[0])
    return [span for _, span in found]


def _month_end(month_start: datetime) -> datetime:
    if month_start.month == 12:
        nxt = month_start.replace(year=month_start.year + 1, month=1)
    else:
        nxt = month_start.replace(month=month_start.month + 1)
    return nxt - timedelta(microseconds=1)


def _prev_month_start(month_start: datetime) -> datetime:
    if month_start.month == 1:
        return month_start.replace(year=month_start.year - 1, month=12)
    return month_start.replace(month=month_start.month - 1)


def _question_ranges(text: str, now: datetime) -> list[tuple[datetime, datetime]]:
    spans: list[tuple[int, tuple[datetime, datetime]]] = []
    for m in _ISO_RANGE.finditer(text):
        low = datetime.fromisoformat(m.group(1)).replace(tzinfo=timezone.utc)
        high = datetime.fromisoformat(m.group(2)).replace(tzinfo=timezone.utc)
        spans.append((m.start(), (low, high)))
    base = len(text)
    for i, span in enumerate(_phrase_ranges(text, now)):
        spans.append((base + i, span))
    spans.sort(key=lambda pair: pair[0])
    return [span for _, span in spans]


# ---- aggregation planning ----------------------------------------------------------

@dataclass
class _AggPlan:
    bucket: Bucket
    fn: str
    metric: str  # "*" allowed for count
    date_key: str | None
    element_label: str | None
    ranges: list[tuple[datetime, datetime]]
    difference: bool


def _observed_key_types(bucket: Bucket) -> dict[str, set[str]]:
    seen: dict[str, set[str]] = {}
    for schema in bucket.schemas.values():
        for element in schema.elements.values():
            for record in element.records:
                if not record.active:
                    continue
                for key, value in record.values.items():
                    if value == MISSING:
                        continue
                    seen.setdefault(key, set()).add(value_type(value))
    return seen


def _plan_aggregation(pool: MemoryPool, question: str, now: datetime) -> _AggPlan | None:
    low = question.lower()
    tokens = tokenize(question)
    difference = bool(_DIFF_PATTERN.search(low))
    ranges = _question_ranges(question, now)
    fn = None
    for name, pattern in _FN_RULES:
        if re.search(pattern, low):
            fn = name
            break
    if fn is None:
        if difference:
            fn = "sum"
        else:
            return None

    # metric key: first question token that names a declared key
    metric = None
    bucket = None
    for tok in tokens:
        for candidate in pool.buckets.values():
            if tok in candidate.declared_keys():
                metric, bucket = tok, candidate
                break
        if metric:
            break

    # element mention: a label whose text appears in the question
    element_label = None
    element_bucket = None
    for candidate in pool.buckets.values():
        for schema in candidate.schemas.values():
            for element in schema.elements.values():
                label = element.label.strip()
                if label and label.lower() in low:
                    if element_label is None or len(label) > len(element_label):
                        element_label = label
                        element_bucket = candidate

    if bucket is None:
        bucket = element_bucket
    if bucket is None and len(pool.buckets) == 1:
        bucket = next(iter(pool.buckets.values()))
    if bucket is None:
        return None
    if element_bucket is not None and element_bucket.id != bucket.id:
        element_label = None  # mention belongs to a different bucket; drop it

    key_types = _observed_key_types(bucket)
    date_key = None
    for key in bucket.declared_keys():
        if key_types.get(key) == {"timestamp"}:
            date_key = key
            break
    if metric is None and fn != "count":
        numeric = [
            key
            for key in bucket.declared_keys()
            if key_types.get(key) == {"number"}
        ]
        if len(numeric) == 1:
            metric = numeric[0]
        else:
            return None
    if metric is None:
        metric = "*"
    if ranges and date_key is None:
        return None
    if difference and len(ranges) != 2:
        return None
    return _AggPlan(
        bucket=bucket,
        fn=fn,
        metric=metric,
        date_key=date_key,
        element_label=element_label,
        ranges=ranges,
        difference=difference,
    )


def _range_query(plan: _AggPlan, span: tuple[datetime, datetime] | None) -> StructuredQuery:
    predicates: tuple[Predicate, ...] = ()
    if span is not None and plan.date_key:
        predicates = (
            Predicate(key=plan.date_key, op="between", low=span[0], high=span[1]),
        )
    return StructuredQuery(
        bucket=plan.bucket.id,
        element_filter=plan.element_label,
        predicates=predicates,
        select=(SelectItem(key=plan.metric, fn=plan.fn),),
    )


def _fmt_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class RetrievalOrchestrator:
    """Plans and executes answers against one store.

    Args:
        pool_fn: zero-arg callable returning the live MemoryPool.
        tools: tool runner; defaults to in-process execution. A stdio
            subprocess client satisfying the same three methods drops in.
        retrieval_k: hits per retrieve step.
        budget: maximum tool steps per answer.
        now_fn: clock used to resolve relative time phrases.
    """

    def __init__(
        self,
        pool_fn: Callable[[], MemoryPool],
        tools=None,
        retrieval_k: int = 5,
        budget: int = 8,
        now_fn: Callable[[], datetime] | None = None,
    ):
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self._pool_fn = pool_fn
        self.tools = tools if tools is not None else InProcessTools(pool_fn, retrieval_k)
        self.retrieval_k = retrieval_k
        self.budget = budget
        self._now_fn = now_fn or (lambda: datetime.now(timezone.utc))

    # -- public ops --

    def classify(self, question: str) -> str:
        return classify(question)

    def retrieve(self, question: str, k: int | None = None) -> list[dict[str, Any]]:
        return retrieve_experiences(self._pool_fn(), question, k or self.retrieval_k)

    def answer(self, question: str, budget: int | None = None) -> Answer:
        """Answer a question or abstain; never raises for plan failures.

        Raises:
            EmptyQuestion: blank question text.
        """
        strategy = classify(question)
        limit = budget if budget is not None else self.budget
        if limit < 1:
            raise ValueError("budget must be >= 1")
        trace: list[ToolStep] = []
        try:
            if strategy == CLASS_AGG:
                return self._answer_aggregation(question, limit, trace)
            if strategy == CLASS_MULTI:
                return self._answer_multifragment(question, limit, trace)
            return self._answer_regional(question, limit, trace)
        except MemoryError_:
            return self._abstain(trace)

    # -- internals --

    def _run_step(self, trace: list[ToolStep], limit: int, tool: str, **args) -> Any | None:
        """Execute one tool call; None signals the budget is exhausted."""
        if len(trace) >= limit:
            return None
        started = time.monotonic()
        if tool == "retrieve":
            result = self.tools.retrieve(args["question"], args["k"])
        elif tool == "query":
            result = self.tools.query(args["text"])
        else:
            result = self.tools.calculate(args["expr"], args["env"])
        trace.append(
            ToolStep(
                index=len(trace),
                tool=tool,
                args=args,
                observation=result,
                elapsed=time.monotonic() - started,
            )
        )
        return result

    def _abstain(self, trace: list[ToolStep]) -> Answer:
        return Answer(text=ABSTAIN_TEXT, value=None, evidence=[], trace=trace, abstained=True)

    def _answer_regional(self, question: str, limit: int, trace: list[ToolStep]) -> Answer:
        hits = self._run_step(trace, limit, "retrieve", question=question, k=self.retrieval_k)
        if not hits:
            return self._abstain(trace)
        positive = [h for h in hits if h["score"] > 0.0]
        if not positive:
            return self._abstain(trace)
        top = positive[0]
        return Answer(
            text=top["text"],
            value=None,
            evidence=[top["experience_id"]],
            trace=trace,
        )

    def _answer_multifragment(self, question: str, limit: int, trace: list[ToolStep]) -> Answer:
        hits = self._run_step(trace, limit, "retrieve", question=question, k=self.retrieval_k)
        if hits is None:
            return self._abstain(trace)
        pool = self._pool_fn()
        low = question.lower()
        mentioned: list[tuple[Bucket, str]] = []
        for bucket in pool.buckets.values():
            for schema in bucket.schemas.values():
                for element in schema.elements.values():
                    label = element.label.strip()
                    if label and label.lower() in low:
                        if (bucket, label) not in mentioned:
                            mentioned.append((bucket, label))
        rows: list[str] = []
        evidence: list[str] = []
        for bucket, label in mentioned:
            q = StructuredQuery(
                bucket=bucket.id,
                element_filter=label,
                select=tuple(SelectItem(key=k) for k in bucket.declared_keys()),
            )
            table_json = self._run_step(trace, limit, "query", text=print_query(q))
            if table_json is None:
                return self._abstain(trace)
            table = ResultTable.from_json(table_json)
            for row, prov in zip(table.rows, table.provenance):
                cells = ", ".join(
                    f"{col}={_fmt_value(v)}" for col, v in zip(table.columns, row) if v is not None
                )
                rows.append(f"{label}: {cells}")
                evidence.extend(prov)
        if not rows:
            positive = [h for h in (hits or []) if h["score"] > 0.0]
            if not positive:
                return self._abstain(trace)
            top = positive[0]
            return Answer(text=top["text"], value=None, evidence=[top["experience_id"]], trace=trace)
        seen: set[str] = set()
        evidence = [e for e in evidence if not (e in seen or seen.add(e))]
        return Answer(text="; ".join(rows), value=None, evidence=evidence, trace=trace)

    def _answer_aggregation(self, question: str, limit: int, trace: list[ToolStep]) -> Answer:
        plan = _plan_aggregation(self._pool_fn(), question, self._now_fn())
        if plan is None:
            return self._abstain(trace)
        spans: Sequence[tuple[datetime, datetime] | None]
        if plan.difference:
            spans = plan.ranges[:2]
        elif plan.ranges:
            spans = [plan.ranges[0]]
        else:
            spans = [None]
        values: list[Any] = []
        evidence: list[str] = []
        for span in spans:
            q = _range_query(plan, span)
            table_json = self._run_step(trace, limit, "query", text=print_query(q))
            if table_json is None:
                return self._abstain(trace)
            table = ResultTable.from_json(table_json)
            if not table.rows or table.rows[0][0] is None:
                return self._abstain(trace)
            values.append(table.rows[0][0])
            for prov in table.provenance:
                evidence.extend(prov)
        if plan.difference:
            env = {"a": values[0], "b": values[1]}
            result = self._run_step(trace, limit, "calculate", expr="a - b", env=env)
            if result is None:
                return self._abstain(trace)
            text = (
                f"{plan.fn}({plan.metric}) was {_fmt_value(values[0])} in the first period "
                f"and {_fmt_value(values[1])} in the second; the difference is {_fmt_value(result)}."
            )
            value = result
        else:
            value = values[0]
            scope = f" for {plan.element_label}" if plan.element_label else ""
            text = f"{plan.fn}({plan.metric}){scope} = {_fmt_value(value)}"
        seen: set[str] = set()
        evidence = [e for e in evidence if not (e in seen or seen.add(e))]
        if not evidence:
            return self._abstain(trace)
        return Answer(text=text, value=value, evidence=evidence, trace=trace)

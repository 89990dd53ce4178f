"""Independent reference implementations backing the test suite.

Each oracle recomputes a production result by a different route: union-find
instead of depth-first search for conflict components, plain dict walks
instead of the pool for query evaluation, a from-scratch tokenizer for the
similarity checks, fresh regexes over raw dialogue text for the evaluation
gold. Where float identity matters (scores that feed a ranking) the
arithmetic keeps the production operation order; everything structural
around it is reimplemented here, not imported.
"""

from __future__ import annotations

import math
import re
from datetime import datetime, timedelta
from fnmatch import fnmatchcase

MISSING_TEXT = "__missing__"


# ---- text similarity ---------------------------------------------------------

def split_tokens(text: str) -> list[str]:
    return [t for t in re.split(r"[^a-z0-9]+", text.lower()) if t]


def term_counts(text: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tok in split_tokens(text):
        counts[tok] = counts.get(tok, 0) + 1
    return counts


def cosine_oracle(text_a: str, text_b: str) -> float:
    a = term_counts(text_a)
    b = term_counts(text_b)
    if not a or not b:
        return 1.0 if a == b else 0.0
    # dot and the squared norms are exact integers, so summation order is
    # irrelevant up to this point; the float expression below must keep the
    # production shape sqrt(sa*sb) to stay bit-identical
    dot = 0
    for tok in sorted(a):
        if tok in b:
            dot += a[tok] * b[tok]
    if dot == 0:
        return 0.0
    sa = sum(c * c for c in a.values())
    sb = sum(c * c for c in b.values())
    score = dot / math.sqrt(sa * sb)
    return min(1.0, max(0.0, score))


# ---- dispatch ----------------------------------------------------------------

def dispatch_oracle(
    meta_text: str,
    entity_text: str,
    schemas: list[tuple[str, str, list[tuple[str, str]]]],
    theta_meta: float,
    theta_elem: float,
) -> tuple[str, str | None, str | None, float, float | None]:
    """Adaptation path for one segment against (schema_id, meta, elements).

    Returns (path, schema_id, element_id, s_star, kappa_star). Ids are
    scanned in sorted order with a strictly-greater update, which matches
    insertion order in the store because ids are monotone.
    """
    best_id = None
    best_meta_score = 0.0
    best_elements: list[tuple[str, str]] = []
    for schema_id, schema_meta, elements in sorted(schemas, key=lambda s: s[0]):
        score = cosine_oracle(meta_text, schema_meta)
        if best_id is None or score > best_meta_score:
            best_id, best_meta_score, best_elements = schema_id, score, elements
    if best_id is None or best_meta_score < theta_meta:
        return ("Creation", None, None, best_meta_score, None)
    best_elt = None
    best_kappa = 0.0
    for element_id, label in sorted(best_elements, key=lambda e: e[0]):
        score = cosine_oracle(entity_text, label)
        if best_elt is None or score > best_kappa:
            best_elt, best_kappa = element_id, score
    if best_elt is None:
        return ("Evolution", best_id, None, best_meta_score, None)
    if best_kappa >= theta_elem:
        return ("Assimilation", best_id, best_elt, best_meta_score, best_kappa)
    return ("Evolution", best_id, None, best_meta_score, best_kappa)


# ---- conflicts ---------------------------------------------------------------

def _kind(v) -> str:
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, datetime):
        return "timestamp"
    if isinstance(v, str):
        return "string"
    raise TypeError(f"not a value: {v!r}")


def _squash(s: str) -> str:
    return " ".join(s.casefold().split())


def value_conflict_oracle(
    key: str,
    a,
    b,
    tolerances: dict[str, float],
    default_rel_tol: float,
    time_tol_seconds: float,
) -> bool:
    if a == MISSING_TEXT or b == MISSING_TEXT:
        return False
    ka, kb = _kind(a), _kind(b)
    if ka != kb:
        return False
    if ka == "number":
        tol = tolerances.get(key)
        if tol is None:
            tol = default_rel_tol * max(abs(a), abs(b))
        return abs(a - b) > tol
    if ka == "timestamp":
        return abs((a - b).total_seconds()) > time_tol_seconds
    if ka == "boolean":
        return a != b
    return _squash(a) != _squash(b)


def reliability_oracle(
    created_at: datetime,
    source_quality: float,
    supports: int,
    now: datetime,
    weights: tuple[float, float, float],
    unit_seconds: float,
    mode: str,
) -> float:
    seconds = (now - created_at).total_seconds()
    if seconds < 0:
        raise ValueError("future record")
    age = seconds / unit_seconds
    if mode == "saturating":
        term = supports / (1.0 + supports)
    else:
        term = float(supports)
    wr, ws, wu = weights
    # same association order as production: (recency + source) + support
    return wr * (1.0 / (1.0 + age)) + ws * source_quality + wu * term


class _UnionFind:
    def __init__(self, ids):
        self.parent = {i: i for i in ids}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def resolve_oracle(
    records: list[dict],
    canonical_keys: tuple[str, ...],
    tolerances: dict[str, float],
    default_rel_tol: float,
    time_tol_seconds: float,
    weights: tuple[float, float, float],
    now: datetime,
    unit_seconds: float = 86400.0,
    mode: str = "saturating",
) -> dict:
    """Expected post-resolution state for one element.

    ``records`` are plain dicts with id, values, created_at, source_quality,
    supports, active. Returns {"components": {frozenset(ids): winner_id},
    "active": {id: bool}} so callers can compare order-free.
    """
    ids = [r["id"] for r in records]
    uf = _UnionFind(ids)
    edged: set[str] = set()
    for i in range(len(records)):
        for j in range(i + 1, len(records)):
            a, b = records[i], records[j]
            hit = any(
                key in a["values"]
                and key in b["values"]
                and value_conflict_oracle(
                    key,
                    a["values"][key],
                    b["values"][key],
                    tolerances,
                    default_rel_tol,
                    time_tol_seconds,
                )
                for key in canonical_keys
            )
            if hit:
                uf.union(a["id"], b["id"])
                edged.add(a["id"])
                edged.add(b["id"])

    groups: dict[str, list[dict]] = {}
    for r in records:
        if r["id"] in edged:
            groups.setdefault(uf.find(r["id"]), []).append(r)

    scores = {
        r["id"]: reliability_oracle(
            r["created_at"], r["source_quality"], r["supports"], now, weights, unit_seconds, mode
        )
        for r in records
    }
    active = {r["id"]: True for r in records}
    components: dict[frozenset, str] = {}
    for members in groups.values():
        winner = min(
            members,
            key=lambda r: (
                -scores[r["id"]],
                (now - r["created_at"]).total_seconds(),
                -r["source_quality"],
                r["id"],
            ),
        )
        components[frozenset(m["id"] for m in members)] = winner["id"]
        for m in members:
            active[m["id"]] = m["id"] == winner["id"]
    return {"components": components, "active": active}


# ---- query evaluation --------------------------------------------------------

def _rankable(v) -> tuple:
    if v is None:
        return (0, "")
    k = _kind(v)
    if k == "boolean":
        return (1, bool(v))
    if k == "number":
        return (2, float(v))
    if k == "timestamp":
        return (3, v.timestamp())
    return (4, v)


def _glob_match(pattern: str, text: str) -> bool:
    return fnmatchcase(text.casefold(), pattern.casefold())


def _predicate_holds(values: dict, pred) -> bool:
    if pred.key not in values:
        return False
    v = values[pred.key]
    if pred.op == "between":
        return pred.low <= v <= pred.high
    if pred.op == "contains":
        return pred.value.casefold() in v.casefold()
    if pred.op == "=":
        return v == pred.value
    if pred.op == "!=":
        return v != pred.value
    if pred.op == "<":
        return v < pred.value
    if pred.op == "<=":
        return v <= pred.value
    if pred.op == ">":
        return v > pred.value
    return v >= pred.value


def _agg_oracle(fn: str, key: str, rows: list[dict]):
    if fn == "count":
        if key == "*":
            return len(rows)
        return sum(1 for r in rows if key in r["values"])
    present = [r["values"][key] for r in rows if key in r["values"]]
    if not present:
        return None
    if fn == "sum":
        total = sum(present)
        return total
    if fn == "avg":
        return sum(present) / len(present)
    return min(present) if fn == "min" else max(present)


def query_oracle(q, fixture: list[dict]) -> tuple[list, list, list]:
    """Evaluate a StructuredQuery over a plain-dict fixture.

    The fixture is a list of buckets: {"id", "name", "schemas": [{"meta",
    "elements": [{"label", "records": [{"id", "values", "active"}]}]}]}.
    Returns (columns, rows, provenance) in the production row order.
    """
    if q.bucket is None:
        buckets = fixture
    else:
        buckets = [_find_bucket(fixture, q.bucket)]
    collected: list[dict] = []
    for bucket in buckets:
        for schema in bucket["schemas"]:
            if q.meta_filter is not None and not _glob_match(q.meta_filter, schema["meta"]):
                continue
            for element in schema["elements"]:
                if q.element_filter is not None and not _glob_match(
                    q.element_filter, element["label"]
                ):
                    continue
                for record in element["records"]:
                    if not record["active"] and not q.include_inactive:
                        continue
                    if all(_predicate_holds(record["values"], p) for p in q.predicates):
                        collected.append(record)
    collected.sort(key=lambda r: r["id"])

    columns = [i.key if i.fn is None else f"{i.fn}({i.key})" for i in q.select]
    has_agg = any(i.fn is not None for i in q.select)

    if not has_agg:
        rows = [[r["values"].get(i.key) for i in q.select] for r in collected]
        prov = [[r["id"]] for r in collected]
        return columns, rows, prov

    if not q.group_by:
        row = [_agg_oracle(i.fn, i.key, collected) if i.fn else None for i in q.select]
        return columns, [row], [[r["id"] for r in collected]]

    grouped: dict[tuple, list[dict]] = {}
    for r in collected:
        grouped.setdefault(tuple(r["values"].get(k) for k in q.group_by), []).append(r)
    rows, prov = [], []
    for gk in sorted(grouped, key=lambda ks: tuple(_rankable(v) for v in ks)):
        members = grouped[gk]
        named = dict(zip(q.group_by, gk))
        row = []
        for item in q.select:
            if item.fn is None:
                row.append(named.get(item.key))
            else:
                row.append(_agg_oracle(item.fn, item.key, members))
        rows.append(row)
        prov.append([m["id"] for m in members])
    return columns, rows, prov


def _find_bucket(fixture: list[dict], ref: str) -> dict:
    for b in fixture:
        if b["id"] == ref:
            return b
    low = ref.lower()
    slug = "_".join(low.split())
    for b in fixture:
        name = b["name"].lower()
        if name == low or "_".join(name.split()) == slug:
            return b
    raise KeyError(ref)


def rows_equal(got: list, want: list, tol: float = 1e-9) -> bool:
    """Row-set comparison: exact for everything but floats, which get tol."""
    if len(got) != len(want):
        return False
    for a, b in zip(got, want):
        if len(a) != len(b):
            return False
        for x, y in zip(a, b):
            if isinstance(x, bool) or isinstance(y, bool):
                if x is not y:
                    return False
            elif isinstance(x, float) or isinstance(y, float):
                if x is None or y is None or not math.isclose(x, y, rel_tol=0.0, abs_tol=tol):
                    return False
            elif x != y:
                return False
    return True


# ---- evaluation-suite gold ---------------------------------------------------

_TURN_RE = re.compile(
    r"^On (?P<month>[A-Za-z]+) (?P<day>\d{1,2}), (?P<year>\d{4}), "
    r"the (?P<metric>\w+) for (?P<entity>[A-Z]{2,5}) was (?P<value>-?\d+\.\d+)\.$"
)
_Q_ENTITY_RE = re.compile(r"\b([A-Z]{2,5})\b")
_Q_RANGE_RE = re.compile(r"between (\d{4}-\d{2}-\d{2}) and (\d{4}-\d{2}-\d{2})")
_MONTHS = {
    "January": 1, "February": 2, "March": 3, "April": 4, "May": 5, "June": 6,
    "July": 7, "August": 8, "September": 9, "October": 10, "November": 11,
    "December": 12,
}


def parse_suite_turns(suite: dict) -> dict[tuple[str, str], tuple[float, int]]:
    """(entity, iso_day) -> (value, turn_index), read straight off the text."""
    out: dict[tuple[str, str], tuple[float, int]] = {}
    for turn in suite["dialogue"]:
        m = _TURN_RE.match(turn["text"])
        if m is None:
            continue
        day = f"{int(m['year']):04d}-{_MONTHS[m['month']]:02d}-{int(m['day']):02d}"
        out[(m["entity"], day)] = (float(m["value"]), turn["turn_index"])
    return out


def gold_oracle(question: str, turns: dict[tuple[str, str], tuple[float, int]]):
    """Recompute one question's gold (value, contributing turn indexes).

    Works from the question text alone, so it shares nothing with the
    generator's hidden table.
    """
    entity = _Q_ENTITY_RE.search(question).group(1)
    ranges = _Q_RANGE_RE.findall(question)
    lowered = question.lower()

    def values_in(d1: str, d2: str) -> tuple[list[float], list[int]]:
        vals, idxs = [], []
        for (ent, day), (value, idx) in sorted(turns.items(), key=lambda kv: kv[0][1]):
            if ent == entity and d1 <= day <= d2:
                vals.append(value)
                idxs.append(idx)
        return vals, idxs

    if "higher total" in lowered:
        (a1, a2), (b1, b2) = ranges[0], ranges[1]
        first, idx1 = values_in(a1, a2)
        second, idx2 = values_in(b1, b2)
        return sum(first) - sum(second), idx1 + idx2

    (d1, d2) = ranges[0]
    vals, idxs = values_in(d1, d2)
    if "how many" in lowered:
        return len(vals), idxs
    if "highest" in lowered:
        return max(vals), idxs
    if "lowest" in lowered:
        return min(vals), idxs
    if "average" in lowered:
        return sum(vals) / len(vals), idxs
    if "total" in lowered:
        return sum(vals), idxs
    raise ValueError(f"unrecognized question: {question!r}")


# ---- misc --------------------------------------------------------------------

def days_ago(now: datetime, days: float) -> datetime:
    return now - timedelta(days=days)

"""Conflict detection and resolution over one element's records.

Two records contradict when some canonical key they both carry holds
clashing values under the conflict policy. Contradictions form an
undirected graph per element; each connected component keeps exactly one
winner, the record with the highest reliability score, and every other
member is deactivated (never deleted). Records untouched by any conflict
edge always stay active.

Reliability blends three signals with nonnegative weights summing to one:
recency decay 1/(1+age), source quality, and a supports term. The supports
term defaults to the saturating form supports/(1+supports); the raw count
variant is available behind ``supports_normalization='raw'``.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

from .errors import BadWeights, NegativeAge
from .provider import ConflictPolicy
from .store import Element, Record

AGE_UNITS = {
    "seconds": 1.0,
    "minutes": 60.0,
    "hours": 3600.0,
    "days": 86400.0,
}

SUPPORT_MODES = ("saturating", "raw")


@dataclass(frozen=True)
class ReliabilityWeights:
    recency: float = 1.0 / 3.0
    source: float = 1.0 / 3.0
    support: float = 1.0 / 3.0

    def __post_init__(self):
        for value in (self.recency, self.source, self.support):
            if value < 0.0:
                raise BadWeights("reliability weights must be nonnegative")
        total = self.recency + self.source + self.support
        if abs(total - 1.0) > 1e-9:
            raise BadWeights(f"reliability weights must sum to 1, got {total!r}")


def record_age(record: Record, now: datetime, age_unit_seconds: float = 86400.0) -> float:
    """Age of a record in configured units. Raises NegativeAge for future records."""
    seconds = (now - record.created_at).total_seconds()
    if seconds < 0:
        raise NegativeAge(f"record {record.id} is newer than now")
    return seconds / age_unit_seconds


def reliability(
    record: Record,
    weights: ReliabilityWeights,
    now: datetime,
    age_unit_seconds: float = 86400.0,
    supports_normalization: str = "saturating",
) -> float:
    """Reliability score in [0, 1] for the default mode.

    The raw supports mode can exceed 1 by design; callers opting into it
    accept an unbounded support term.
    """
    age = record_age(record, now, age_unit_seconds)
    if supports_normalization == "saturating":
        support_term = record.supports / (1.0 + record.supports)
    elif supports_normalization == "raw":
        support_term = float(record.supports)
    else:
        raise ValueError(f"unknown supports_normalization: {supports_normalization!r}")
    return (
        weights.recency * (1.0 / (1.0 + age))
        + weights.source * record.source_quality
        + weights.support * support_term
    )


def contradicts(
    a: Record,
    b: Record,
    canonical_keys: tuple[str, ...],
    policy: ConflictPolicy,
) -> bool:
    """True when any shared canonical key holds conflicting values."""
    for key in canonical_keys:
        if key in a.values and key in b.values:
            if policy.value_conflict(key, a.values[key], b.values[key]):
                return True
    return False


@dataclass
class ResolutionReport:
    components: list[list[str]]  # conflict components with two or more records
    winners: list[str]           # one per component, same order
    deactivated: list[str]       # records flipped active -> inactive by this call


def _components(records: list[Record], canonical_keys: tuple[str, ...], policy: ConflictPolicy) -> list[list[int]]:
    n = len(records)
    adjacency: list[set[int]] = [set() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if contradicts(records[i], records[j], canonical_keys, policy):
                adjacency[i].add(j)
                adjacency[j].add(i)
    seen = [False] * n
    components: list[list[int]] = []
    for start in range(n):
        if seen[start] or not adjacency[start]:
            continue
        stack = [start]
        seen[start] = True
        component = []
        while stack:
            node = stack.pop()
            component.append(node)
            for neighbor in adjacency[node]:
                if not seen[neighbor]:
                    seen[neighbor] = True
                    stack.append(neighbor)
        components.append(sorted(component))
    return components


def resolve(
    element: Element,
    canonical_keys: tuple[str, ...],
    policy: ConflictPolicy,
    weights: ReliabilityWeights,
    now: datetime,
    age_unit_seconds: float = 86400.0,
    supports_normalization: str = "saturating",
    set_active=None,
) -> ResolutionReport:
    """Recompute active flags for one element and report what changed.

    Winner selection per component: highest reliability, ties broken by
    smaller age, then larger source quality, then smaller record id.
    Active flags are recomputed wholesale, so running resolve twice is a
    no-op the second time, and a record can regain activity when a newer
    arrival reshapes its component.

    Args:
        set_active: optional callback (record_id, bool) used to apply flag
            changes; defaults to flipping the in-memory records directly.
            Stores pass their logged setter here so changes are durable.
    """
    records = element.records
    report = ResolutionReport(components=[], winners=[], deactivated=[])
    if not records:
        return report

    scores = {
        r.id: reliability(r, weights, now, age_unit_seconds, supports_normalization)
        for r in records
    }
    desired: dict[str, bool] = {r.id: True for r in records}

    for component in _components(records, canonical_keys, policy):
        members = [records[i] for i in component]
        # sort ascending: better candidates first
        ranked = sorted(
            members,
            key=lambda r: (
                -scores[r.id],
                (now - r.created_at).total_seconds(),
                -r.source_quality,
                r.id,
            ),
        )
        winner = ranked[0]
        for member in members:
            desired[member.id] = member.id == winner.id
        report.components.append([r.id for r in members])
        report.winners.append(winner.id)

    changes: list[tuple[str, bool]] = []
    for record in records:
        want = desired[record.id]
        if record.active != want:
            changes.append((record.id, want))
            if not want:
                report.deactivated.append(record.id)
    for record_id, want in changes:
        if set_active is not None:
            set_active(record_id, want)
        else:
            for record in records:
                if record.id == record_id:
                    record.active = want
                    break
    return report

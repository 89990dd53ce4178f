"""Reference provider: segmentation, routing, rule-driven extraction."""

from datetime import datetime, timezone

import pytest

from schemamem.errors import EmptyExperience, ProviderFailure
from schemamem.provider import (
    ConflictPolicy,
    ExtractionRules,
    LexicalProvider,
    parse_when,
)
from schemamem.store import MemoryStore
from schemamem.values import MISSING

from .conftest import ts

UTC = timezone.utc


def two_buckets(store):
    weather = store.put_bucket(
        "weather rain snow temperature forecast", ("city",), name="Weather"
    )
    market = store.put_bucket(
        "stock ticker close price market", ("ticker",), name="Market"
    )
    return weather, market


def test_parse_when_iso_and_human():
    assert parse_when("2024-04-03") == datetime(2024, 4, 3, tzinfo=UTC)
    assert parse_when("April 3, 2024") == datetime(2024, 4, 3, tzinfo=UTC)
    assert parse_when("on APRIL 3 2024 it rained") == datetime(2024, 4, 3, tzinfo=UTC)
    with pytest.raises(ValueError):
        parse_when("not a date")


def test_policy_numbers_relative_tolerance():
    policy = ConflictPolicy()
    assert not policy.value_conflict("p", 100.0, 100.0 + 1e-5)
    assert policy.value_conflict("p", 100.0, 100.1)
    assert not policy.value_conflict("p", 0.0, 0.0)
    # zero magnitude means zero tolerance
    assert policy.value_conflict("p", 0.0, 1e-12)


def test_policy_absolute_override_per_key():
    policy = ConflictPolicy(numeric_tolerances={"price": 0.5})
    assert not policy.value_conflict("price", 10.0, 10.4)
    assert policy.value_conflict("price", 10.0, 10.6)
    # other keys keep the relative default
    assert policy.value_conflict("other", 10.0, 10.4)


def test_policy_timestamps_and_booleans():
    policy = ConflictPolicy(time_tolerance_seconds=60.0)
    assert not policy.value_conflict("at", ts(1, 0), ts(1, 0))
    assert not policy.value_conflict(
        "at", ts(1, 0), datetime(2024, 5, 1, 0, 0, 30, tzinfo=UTC)
    )
    assert policy.value_conflict("at", ts(1, 0), ts(1, 1))
    assert policy.value_conflict("flag", True, False)
    assert not policy.value_conflict("flag", True, True)


def test_policy_strings_compare_canonically():
    policy = ConflictPolicy()
    assert not policy.value_conflict("city", "New  York", "new york ")
    assert policy.value_conflict("city", "Oslo", "Bergen")


def test_policy_missing_never_conflicts():
    policy = ConflictPolicy()
    assert not policy.value_conflict("k", MISSING, "Oslo")
    assert not policy.value_conflict("k", 3, MISSING)


def test_policy_type_mismatch_is_not_conflict():
    policy = ConflictPolicy()
    assert not policy.value_conflict("k", "3", 3)
    assert not policy.value_conflict("k", True, 1.0)


def test_policy_json_round_trip():
    policy = ConflictPolicy(
        numeric_tolerances={"p": 0.5}, default_relative_tolerance=1e-3,
        time_tolerance_seconds=5.0,
    )
    assert ConflictPolicy.from_json(policy.to_json()) == policy


def test_segment_splits_sentences_and_routes(mem_store):
    weather, market = two_buckets(mem_store)
    provider = LexicalProvider()
    exp = mem_store.put_experience(
        "The rain in Oslo was heavy. The ticker close price rose.",
        received_at=ts(1),
    )
    segments = provider.segment(exp, list(mem_store.pool.buckets.values()))
    assert len(segments) == 2
    assert segments[0].bucket_hint == weather.id
    assert segments[1].bucket_hint == market.id
    assert segments[0].text.endswith("heavy.")


def test_segment_newlines_split_too(mem_store):
    two_buckets(mem_store)
    provider = LexicalProvider()
    exp = mem_store.put_experience("rain today\nsnow tomorrow", received_at=ts(1))
    segments = provider.segment(exp, list(mem_store.pool.buckets.values()))
    assert [s.text for s in segments] == ["rain today", "snow tomorrow"]


def test_segment_requires_text_and_buckets(mem_store):
    provider = LexicalProvider()
    exp = mem_store.put_experience("words", received_at=ts(1))
    with pytest.raises(ProviderFailure):
        provider.segment(exp, [])
    bad = mem_store.put_experience("x", received_at=ts(1))
    bad.raw_text = "   "
    with pytest.raises(EmptyExperience):
        provider.segment(bad, [])


def test_route_tie_breaks_to_lowest_bucket_id(mem_store):
    a = mem_store.put_bucket("alpha topic", ("k",), name="A")
    b = mem_store.put_bucket("beta topic", ("k",), name="B")
    provider = LexicalProvider()
    # "topic" overlaps both equally; ids are monotone so a wins
    assert provider.route("some topic", [b, a]).id == a.id


def test_missing_canonical_keys_get_sentinel(mem_store):
    mem_store.put_bucket("weather", ("city", "country"), name="W")
    rules = ExtractionRules(
        key_rules={"city": [{"regex": r"in ([A-Z][a-z]+)", "type": "string"}]}
    )
    provider = LexicalProvider(rules)
    exp = mem_store.put_experience("It rained in Oslo today.", received_at=ts(1))
    (segment,) = provider.segment(exp, list(mem_store.pool.buckets.values()))
    assert segment.extracted_record["city"] == "Oslo"
    assert segment.extracted_record["country"] == MISSING
    assert segment.missing_keys == ["country"]


def test_optional_keys_are_simply_absent(mem_store):
    mem_store.put_bucket("weather", ("city",), ("mm",), name="W")
    rules = ExtractionRules(
        key_rules={
            "city": [{"regex": r"in ([A-Z][a-z]+)", "type": "string"}],
            "mm": [{"regex": r"(\d+)mm", "type": "number"}],
        }
    )
    provider = LexicalProvider(rules)
    exp = mem_store.put_experience("It rained in Oslo.", received_at=ts(1))
    (segment,) = provider.segment(exp, list(mem_store.pool.buckets.values()))
    assert "mm" not in segment.extracted_record


def test_key_rule_kinds(mem_store):
    mem_store.put_bucket("readings", ("site",), ("mm", "wet", "day", "grade"), name="R")
    rules = ExtractionRules(
        key_rules={
            "site": [{"keywords": {"north": ["northern", "north"], "south": ["south"]}}],
            "mm": [{"regex": r"(-?\d+(?:\.\d+)?)\s*mm", "type": "number"}],
            "wet": [{"regex": r"\b(yes|no)\b", "type": "boolean"}],
            "day": [{"from": "received_at"}],
            "grade": [{"regex": r"grade (\w+)"}],
        }
    )
    provider = LexicalProvider(rules)
    exp = mem_store.put_experience(
        "Northern site reported 12mm, wet yes, grade B.", received_at=ts(7)
    )
    (segment,) = provider.segment(exp, list(mem_store.pool.buckets.values()))
    record = segment.extracted_record
    assert record["site"] == "north"
    assert record["mm"] == 12
    assert record["wet"] is True
    assert record["day"] == ts(7)
    assert record["grade"] == "B"


def test_number_coercion_int_vs_float(mem_store):
    mem_store.put_bucket("readings", ("mm",), name="R")
    rules = ExtractionRules(
        key_rules={"mm": [{"regex": r"(-?\d+(?:\.\d+)?)", "type": "number"}]}
    )
    provider = LexicalProvider(rules)
    exp = mem_store.put_experience("reading -3", received_at=ts(1))
    (seg,) = provider.segment(exp, list(mem_store.pool.buckets.values()))
    assert seg.extracted_record["mm"] == -3
    assert isinstance(seg.extracted_record["mm"], int)
    exp2 = mem_store.put_experience("reading 3.5", received_at=ts(1))
    (seg2,) = provider.segment(exp2, list(mem_store.pool.buckets.values()))
    assert seg2.extracted_record["mm"] == 3.5


def test_min_extracted_keys_suppresses_filler(mem_store):
    mem_store.put_bucket("readings", ("site",), ("mm",), name="R")
    rules = ExtractionRules(
        key_rules={
            "site": [{"regex": r"site ([A-Z])", "type": "string"}],
            "mm": [{"regex": r"(\d+)mm", "type": "number"}],
        },
        min_extracted_keys=2,
    )
    provider = LexicalProvider(rules)
    exp = mem_store.put_experience(
        "Thanks, noted. Site A reported 12mm.", received_at=ts(1)
    )
    segments = provider.segment(exp, list(mem_store.pool.buckets.values()))
    assert len(segments) == 1
    assert segments[0].extracted_record == {"site": "A", "mm": 12}


def test_from_received_at_does_not_count_toward_minimum(mem_store):
    mem_store.put_bucket("readings", ("site",), ("day",), name="R")
    rules = ExtractionRules(
        key_rules={
            "site": [{"regex": r"site ([A-Z])", "type": "string"}],
            "day": [{"from": "received_at"}],
        },
        min_extracted_keys=2,
    )
    provider = LexicalProvider(rules)
    exp = mem_store.put_experience("Site A checked in.", received_at=ts(1))
    # one text key plus the timestamp backfill is below the minimum of two
    assert provider.segment(exp, list(mem_store.pool.buckets.values())) == []


def test_meta_rules_first_match_and_fallbacks(mem_store):
    mem_store.put_bucket("x", ("k",), name="X")
    rules = ExtractionRules(
        meta_rules=[
            {"regex": r"\brain\b", "meta": "Rainfall"},
            {"regex": r"\b(snow)\b"},
        ]
    )
    provider = LexicalProvider(rules)

    def meta_of(text):
        exp = mem_store.put_experience(text, received_at=ts(1))
        (seg,) = provider.segment(exp, list(mem_store.pool.buckets.values()))
        return seg.extracted_meta

    assert meta_of("RAIN again") == "Rainfall"
    assert meta_of("fresh Snow fell") == "Snow"
    assert meta_of("97 bananas arrived") == "Bananas"
    prov_bare = LexicalProvider()
    exp = mem_store.put_experience("99 44", received_at=ts(1))
    (seg,) = prov_bare.segment(exp, list(mem_store.pool.buckets.values()))
    assert seg.extracted_meta == "99"


def test_entity_rules_regex_then_key_fallback(mem_store):
    mem_store.put_bucket("x", ("person",), name="X")
    rules = ExtractionRules(
        entity_rules=[{"regex": r"for ([A-Z]{2,5}) was"}],
        key_rules={"person": [{"regex": r"^([a-z]+)", "type": "string"}]},
    )
    provider = LexicalProvider(rules)
    exp = mem_store.put_experience("the close for NFLX was 10.", received_at=ts(1))
    (seg,) = provider.segment(exp, list(mem_store.pool.buckets.values()))
    assert seg.entity == "NFLX"

    # no regex hit: falls back to the first canonical key, title-cased
    rules2 = ExtractionRules(
        entity_rules=[{"regex": r"for ([A-Z]{2,5}) was"}],
        key_rules={"person": [{"regex": r"\b(ada)\b", "type": "string"}]},
    )
    provider2 = LexicalProvider(rules2)
    exp2 = mem_store.put_experience("ada moved somewhere.", received_at=ts(1))
    (seg2,) = provider2.segment(exp2, list(mem_store.pool.buckets.values()))
    assert seg2.entity == "Ada"


def test_entity_from_key_rule(mem_store):
    mem_store.put_bucket("x", ("person",), name="X")
    rules = ExtractionRules(
        entity_rules=[{"from_key": "person", "title": True}],
        key_rules={"person": [{"regex": r"\b(ada)\b", "type": "string"}]},
    )
    provider = LexicalProvider(rules)
    exp = mem_store.put_experience("ada is here.", received_at=ts(1))
    (seg,) = provider.segment(exp, list(mem_store.pool.buckets.values()))
    assert seg.entity == "Ada"


def test_entity_falls_back_to_meta_when_keys_missing(mem_store):
    mem_store.put_bucket("x", ("person",), name="X")
    rules = ExtractionRules(meta_rules=[{"regex": r".*", "meta": "Notes"}])
    provider = LexicalProvider(rules)
    exp = mem_store.put_experience("nothing matched here.", received_at=ts(1))
    (seg,) = provider.segment(exp, list(mem_store.pool.buckets.values()))
    assert seg.extracted_record["person"] == MISSING
    assert seg.entity == "Notes"


def test_extraction_rules_json_round_trip():
    rules = ExtractionRules(
        meta_rules=[{"regex": "x", "meta": "X"}],
        entity_rules=[{"from_key": "k"}],
        key_rules={"k": [{"regex": "(a)", "type": "string"}]},
        min_extracted_keys=1,
    )
    assert ExtractionRules.from_json(rules.to_json()) == rules


def test_bad_regex_wraps_as_provider_failure(mem_store):
    mem_store.put_bucket("x", ("k",), name="X")
    provider = LexicalProvider(
        ExtractionRules(key_rules={"k": [{"regex": "(unclosed", "type": "string"}]})
    )
    exp = mem_store.put_experience("whatever", received_at=ts(1))
    with pytest.raises(ProviderFailure):
        provider.segment(exp, list(mem_store.pool.buckets.values()))

"""Value typing, canonical text, timestamp parsing, flatten, JSON codec."""

from datetime import datetime, timezone

import pytest

from schemamem.values import (
    MISSING,
    canon_text,
    flatten,
    format_timestamp,
    is_value,
    parse_timestamp,
    value_from_json,
    value_to_json,
    value_type,
    values_from_json,
    values_to_json,
)

UTC = timezone.utc


def test_value_type_partitions():
    assert value_type("x") == "string"
    assert value_type(3) == "number"
    assert value_type(3.5) == "number"
    assert value_type(True) == "boolean"
    assert value_type(datetime(2024, 1, 1, tzinfo=UTC)) == "timestamp"


def test_bool_is_not_number():
    # bool subclasses int; the type map must not conflate them
    assert value_type(True) == "boolean"
    assert is_value(True)


def test_value_type_rejects_foreign():
    with pytest.raises(TypeError):
        value_type([1, 2])
    assert not is_value(None)
    assert not is_value({"a": 1})


def test_canon_text_folds_case_and_whitespace():
    assert canon_text("  Rainy\tDays \n ahead ") == "rainy days ahead"
    assert canon_text("STRASSE") == canon_text("strasse")


def test_parse_timestamp_variants():
    want = datetime(2024, 4, 3, 10, 30, 0, tzinfo=UTC)
    assert parse_timestamp("2024-04-03T10:30:00Z") == want
    assert parse_timestamp("2024-04-03T10:30:00+00:00") == want
    assert parse_timestamp("2024-04-03T10:30:00") == want
    assert parse_timestamp("2024-04-03T12:30:00+02:00") == want


def test_parse_timestamp_date_only():
    assert parse_timestamp("2024-04-03") == datetime(2024, 4, 3, tzinfo=UTC)


def test_format_timestamp_round_trip():
    dt = datetime(2024, 4, 3, 10, 30, 0, 123456, tzinfo=UTC)
    assert parse_timestamp(format_timestamp(dt)) == dt


def test_format_timestamp_naive_assumed_utc():
    naive = datetime(2024, 4, 3, 10, 30)
    assert format_timestamp(naive).endswith("+00:00")


def test_flatten_nested():
    data = {"a": 1, "b": {"c": "x", "d": {"e": True}}}
    assert flatten(data) == {"a": 1, "b.c": "x", "b.d.e": True}


def test_flatten_rejects_lists():
    with pytest.raises(TypeError):
        flatten({"a": [1, 2]})


def test_json_codec_tags_timestamps():
    dt = datetime(2024, 4, 3, tzinfo=UTC)
    values = {"when": dt, "city": "Oslo", "n": 2, "ok": False}
    encoded = values_to_json(values)
    assert encoded["when"] == {"__ts__": format_timestamp(dt)}
    assert values_from_json(encoded) == values


def test_json_codec_rejects_unknown_objects():
    with pytest.raises(TypeError):
        value_from_json({"weird": 1})
    assert value_to_json(5) == 5


def test_missing_sentinel_is_a_string():
    assert value_type(MISSING) == "string"

"""HTTP routes: status codes, error envelopes, payload shapes."""

import pytest
from fastapi.testclient import TestClient

from schemamem.service import create_app

from .conftest import RESIDENCE_SPEC


@pytest.fixture
def client(engine):
    return TestClient(create_app(engine))


@pytest.fixture
def live(client):
    """Initialized service with two facts ingested."""
    assert client.post("/v1/init", json=RESIDENCE_SPEC).status_code == 201
    for day, text in ((1, "Ada lives in Oslo."), (2, "Grace lives in Paris.")):
        r = client.post(
            "/v1/experiences",
            json={"raw_text": text, "received_at": f"2024-05-0{day}T00:00:00+00:00"},
        )
        assert r.status_code == 200
    return client


def test_health_reflects_lifecycle(client):
    before = client.get("/v1/health").json()
    assert before == {"status": "ok", "version": 0, "initialized": False}
    client.post("/v1/init", json=RESIDENCE_SPEC)
    after = client.get("/v1/health").json()
    assert after["initialized"] is True
    assert after["version"] > 0


def test_init_returns_layout_and_conflicts_on_rerun(client):
    first = client.post("/v1/init", json=RESIDENCE_SPEC)
    assert first.status_code == 201
    body = first.json()
    assert body["name"] == "people"
    assert body["buckets"][0]["schemas"] == 1
    second = client.post("/v1/init", json=RESIDENCE_SPEC)
    assert second.status_code == 409
    envelope = second.json()
    assert envelope["code"] == "non_empty_store"
    assert envelope["detail"] == {"buckets": 1}
    assert envelope["message"]


def test_ingest_before_init_conflicts(client):
    r = client.post("/v1/experiences", json={"raw_text": "Ada lives in Oslo."})
    assert r.status_code == 409
    assert r.json()["code"] == "no_buckets"


def test_ingest_single_returns_report(live):
    r = live.post(
        "/v1/experiences",
        json={"raw_text": "Ada lives in Bergen.", "received_at": "2024-05-03T00:00:00+00:00"},
    )
    body = r.json()
    assert body["counters"]["assimilation"] == 1
    assert body["conflicts_resolved"] == 1
    assert len(body["per_segment"]) == 1


def test_ingest_batch_returns_reports(client):
    client.post("/v1/init", json=RESIDENCE_SPEC)
    r = client.post(
        "/v1/experiences",
        json={
            "items": [
                {"raw_text": "Ada lives in Oslo.", "received_at": "2024-05-01T00:00:00+00:00"},
                {"raw_text": "Grace lives in Paris.", "received_at": "2024-05-02T00:00:00+00:00"},
            ]
        },
    )
    assert r.status_code == 200
    reports = r.json()["reports"]
    assert len(reports) == 2
    assert all(r["experience_id"].startswith("exp_") for r in reports)


def test_ingest_blank_text_rejected(live):
    r = live.post("/v1/experiences", json={"raw_text": "   "})
    assert r.status_code == 400
    assert r.json()["code"] == "empty_experience"


def test_answer_round_trip(live):
    r = live.post("/v1/answer", json={"question": "Where does Ada live?"})
    assert r.status_code == 200
    body = r.json()
    assert body["abstained"] is False
    assert body["text"] == "Ada lives in Oslo."
    assert body["trace"][0]["tool"] == "retrieve"


def test_answer_respects_budget(live):
    r = live.post(
        "/v1/answer",
        json={"question": "Based on Ada and Grace, summarize.", "budget": 1},
    )
    assert r.status_code == 200
    assert r.json()["abstained"] is True


def test_answer_empty_question_rejected(live):
    r = live.post("/v1/answer", json={"question": "  "})
    assert r.status_code == 400
    assert r.json()["code"] == "empty_question"


def test_answer_on_empty_store_abstains(client):
    client.post("/v1/init", json=RESIDENCE_SPEC)
    r = client.post("/v1/answer", json={"question": "Where does Ada live?"})
    assert r.status_code == 200
    assert r.json()["abstained"] is True


def test_query_returns_table(live):
    r = live.post(
        "/v1/query", json={"query": "FROM residence WHERE city = \"Oslo\" SELECT person, city"}
    )
    assert r.status_code == 200
    body = r.json()
    assert body["columns"] == ["person", "city"]
    assert body["rows"] == [["Ada", "Oslo"]]
    assert len(body["provenance"]) == 1


def test_query_syntax_error_envelope(live):
    r = live.post("/v1/query", json={"query": "FROM"})
    assert r.status_code == 400
    body = r.json()
    assert body["code"] == "syntax_error"
    assert body["detail"]["expected"] == "a bucket name"


def test_query_unknown_bucket_is_404(live):
    r = live.post("/v1/query", json={"query": "FROM warehouse SELECT count(*)"})
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_bucket"


def test_query_unknown_key_is_400(live):
    r = live.post("/v1/query", json={"query": "FROM residence SELECT altitude"})
    assert r.status_code == 400
    assert r.json()["code"] == "unknown_key"


def test_buckets_listing(live):
    body = live.get("/v1/buckets").json()
    (bucket,) = body["buckets"]
    assert bucket["name"] == "residence"
    assert bucket["canonical_keys"] == ["person", "city"]
    assert bucket["records"] == 2
    assert bucket["active_records"] == 2


def test_bucket_schemas_by_name_and_id(live):
    by_name = live.get("/v1/buckets/residence/schemas")
    assert by_name.status_code == 200
    body = by_name.json()
    labels = [e["label"] for s in body["schemas"] for e in s["elements"]]
    assert "Ada" in labels and "Grace" in labels
    by_id = live.get(f"/v1/buckets/{body['bucket_id']}/schemas")
    assert by_id.json() == body


def test_bucket_schemas_unknown_ref(live):
    r = live.get("/v1/buckets/warehouse/schemas")
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_bucket"


def test_record_lookup(live):
    table = live.post("/v1/query", json={"query": "FROM residence SELECT person"}).json()
    record_id = table["provenance"][0][0]
    r = live.get(f"/v1/records/{record_id}")
    assert r.status_code == 200
    body = r.json()
    assert body["id"] == record_id
    assert body["element_label"] in {"Ada", "Grace"}
    assert body["schema_meta"] == "Residence facts"
    assert body["active"] is True


def test_record_lookup_unknown_is_404(live):
    r = live.get("/v1/records/rec_0000000000000000000000000")
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_target"

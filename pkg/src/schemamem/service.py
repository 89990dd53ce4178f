"""HTTP front end.

Thin JSON routes over a single MemoryEngine. All failures surface as one
error envelope: {"code": ..., "message": ..., "detail": ...} with a status
code derived from the error's kind, so clients never parse free-form text.
"""

from __future__ import annotations

import logging
from typing import Any

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .engine import MemoryEngine
from .errors import MemoryError_, UnknownBucket
from .values import parse_timestamp

log = logging.getLogger(__name__)

_STATUS_BY_CODE = {
    "non_empty_store": 409,
    "unknown_target": 404,
    "unknown_bucket": 404,
    "syntax_error": 400,
    "invalid_query": 400,
    "unknown_key": 400,
    "type_mismatch": 400,
    "divide_by_zero": 400,
    "unbound_reference": 400,
    "empty_experience": 400,
    "empty_question": 400,
    "empty_spec": 400,
    "empty_key_set": 400,
    "duplicate_key_name": 400,
    "duplicate_bucket_name": 400,
    "missing_canonical_key": 400,
    "config_invalid": 400,
    "invalid_theta": 400,
    "bad_weights": 400,
    "empty_store": 409,
    "no_buckets": 409,
}


def _envelope(exc: MemoryError_) -> dict[str, Any]:
    return {"code": exc.code, "message": exc.message, "detail": exc.detail}


def create_app(engine: MemoryEngine) -> FastAPI:
    app = FastAPI(title="schemamem", version=__version__)
    app.state.engine = engine

    @app.exception_handler(MemoryError_)
    async def memory_error_handler(request: Request, exc: MemoryError_):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        if status == 500:
            log.error("unmapped engine error on %s: %s", request.url.path, exc)
        return JSONResponse(status_code=status, content=_envelope(exc))

    @app.post("/v1/init", status_code=201)
    def init(payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        return engine.init(payload)

    @app.post("/v1/experiences")
    def experiences(payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        if "items" in payload:
            reports = engine.ingest_many(payload["items"])
            return {"reports": [r.to_json() for r in reports]}
        received = payload.get("received_at")
        report = engine.ingest(
            raw_text=payload.get("raw_text", ""),
            source_tag=payload.get("source_tag", "user"),
            source_quality=float(payload.get("source_quality", 1.0)),
            received_at=parse_timestamp(received) if received else None,
        )
        return report.to_json()

    @app.post("/v1/answer")
    def answer(payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        budget = payload.get("budget")
        result = engine.answer(
            payload.get("question", ""),
            budget=int(budget) if budget is not None else None,
        )
        return result.to_json()

    @app.post("/v1/query")
    def query(payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        return engine.query(payload.get("query", "")).to_json()

    @app.get("/v1/buckets")
    def buckets() -> dict[str, Any]:
        return {"buckets": engine.inspect()["buckets"]}

    @app.get("/v1/buckets/{ref}/schemas")
    def bucket_schemas(ref: str) -> dict[str, Any]:
        bucket = engine.store.resolve_bucket_ref(ref)
        if bucket is None:
            raise UnknownBucket(f"no such bucket: {ref}")
        schemas = []
        for schema in sorted(bucket.schemas.values(), key=lambda s: s.id):
            schemas.append(
                {
                    "id": schema.id,
                    "meta": schema.meta,
                    "elements": [
                        {
                            "id": element.id,
                            "label": element.label,
                            "records": len(element.records),
                            "active_records": sum(1 for r in element.records if r.active),
                        }
                        for element in sorted(schema.elements.values(), key=lambda e: e.id)
                    ],
                }
            )
        return {"bucket_id": bucket.id, "schemas": schemas}

    @app.get("/v1/records/{record_id}")
    def record(record_id: str) -> dict[str, Any]:
        return engine.record(record_id)

    @app.get("/v1/health")
    def health() -> dict[str, Any]:
        return {
            "status": "ok",
            "version": engine.store.version,
            "initialized": engine.initialized(),
        }

    return app


def serve(engine: MemoryEngine, host: str, port: int) -> None:
    """Blocking uvicorn run; used by the CLI."""
    import uvicorn

    uvicorn.run(create_app(engine), host=host, port=port, log_level="info")

"""Fixtures: a real service on a loopback socket, one per test.

The client is exercised against actual HTTP, not a stubbed transport,
so serialization quirks (timestamp codec, error envelopes, status codes)
are covered end to end. Port 0 lets the kernel pick a free port.
"""

from __future__ import annotations

import threading
import time
from datetime import datetime, timezone

import pytest
import uvicorn
from schemamem.engine import MemoryEngine
from schemamem.service import create_app

from schemamem_client import ClientConfig, MemoryClient

NOW = datetime(2024, 5, 10, 12, 0, tzinfo=timezone.utc)

GOAL = {
    "name": "people",
    "description": "who lives where",
    "buckets": [
        {
            "name": "residence",
            "centric_info": "where a person lives and since when",
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
            "city": [{"regex": r"\bin ([A-Z][A-Za-z]+)", "type": "string"}],
            "since": [{"regex": r"\bsince (\d{4}-\d{2}-\d{2})\b", "type": "timestamp"}],
        },
    },
}


@pytest.fixture
def goal_spec():
    return GOAL


@pytest.fixture
def service(tmp_path):
    """Start a fresh engine behind uvicorn; yield its base URL."""
    engine = MemoryEngine(tmp_path / "store", now_fn=lambda: NOW)
    config = uvicorn.Config(
        create_app(engine), host="127.0.0.1", port=0, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("service did not start within 10s")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5.0)


@pytest.fixture
def client(service):
    with MemoryClient(ClientConfig(base_url=service, timeout=5.0)) as c:
        yield c

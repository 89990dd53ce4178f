"""Tool execution over a line-delimited JSON stdio protocol.

Each request is one JSON object per line: {"id": n, "tool": name, "args": {...}}.
Each response mirrors the id: {"id": n, "result": ...} on success or
{"id": n, "error": {"code": ..., "message": ...}} on failure. The server
answers requests in order and exits on EOF. Tools mirror the in-process
runner: retrieve, query, calculate.

Run a server against a persisted store root:

    python -m schemamem.toolproc --root /path/to/store
"""

from __future__ import annotations

import argparse
import json
import logging
import subprocess
import sys
import threading
from typing import Any, IO

from .errors import MemoryError_, ProviderFailure
from .retrieval import InProcessTools

log = logging.getLogger(__name__)

TOOLS = ("retrieve", "query", "calculate")


def handle_request(tools: InProcessTools, request: dict[str, Any]) -> dict[str, Any]:
    """Dispatch one decoded request to the tool runner."""
    rid = request.get("id")
    try:
        tool = request.get("tool")
        args = request.get("args") or {}
        if tool == "retrieve":
            result = tools.retrieve(args["question"], int(args.get("k", tools.retrieval_k)))
        elif tool == "query":
            result = tools.query(args["text"])
        elif tool == "calculate":
            result = tools.calculate(args["expr"], args.get("env") or {})
        else:
            return {"id": rid, "error": {"code": "unknown_tool", "message": f"no such tool: {tool!r}"}}
        return {"id": rid, "result": result}
    except MemoryError_ as exc:
        return {"id": rid, "error": {"code": exc.code, "message": exc.message}}
    except (KeyError, TypeError, ValueError) as exc:
        return {"id": rid, "error": {"code": "bad_request", "message": str(exc)}}


def serve(tools: InProcessTools, stdin: IO[str], stdout: IO[str]) -> None:
    """Answer requests line by line until EOF. Malformed lines get id null."""
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            log.warning("dropping malformed tool request: %s", exc)
            response = {"id": None, "error": {"code": "bad_request", "message": str(exc)}}
        else:
            response = handle_request(tools, request)
        stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        stdout.flush()


class StdioToolClient:
    """Drives a tool server subprocess; satisfies the tool-runner interface.

    Requests are strictly sequential, so ids pair trivially. The child is
    expected to hold its own store open; this client never touches the pool.
    """

    def __init__(self, cmd: list[str]):
        self._proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._next_id = 0
        self._lock = threading.Lock()

    def _call(self, tool: str, args: dict[str, Any]) -> Any:
        with self._lock:
            self._next_id += 1
            rid = self._next_id
            assert self._proc.stdin is not None and self._proc.stdout is not None
            self._proc.stdin.write(json.dumps({"id": rid, "tool": tool, "args": args}) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        if not line:
            raise ProviderFailure("tool process closed its output")
        response = json.loads(line)
        if response.get("id") != rid:
            raise ProviderFailure(f"tool process answered id {response.get('id')}, expected {rid}")
        if "error" in response:
            err = response["error"]
            raise ProviderFailure(f"{err.get('code')}: {err.get('message')}")
        return response["result"]

    def retrieve(self, question: str, k: int) -> list[dict[str, Any]]:
        return self._call("retrieve", {"question": question, "k": k})

    def query(self, text: str) -> dict[str, Any]:
        return self._call("query", {"text": text})

    def calculate(self, expr: str, env: dict[str, Any]) -> Any:
        return self._call("calculate", {"expr": expr, "env": env})

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "StdioToolClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="serve memory tools over stdio")
    parser.add_argument("--root", required=True, help="store directory to open")
    parser.add_argument("--retrieval-k", type=int, default=5)
    args = parser.parse_args(argv)

    from .store import MemoryStore

    store = MemoryStore(args.root)
    tools = InProcessTools(lambda: store.pool, retrieval_k=args.retrieval_k)
    serve(tools, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())

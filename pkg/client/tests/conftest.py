"""Fixtures: a live scoring service and a controllable flaky stub server."""

from __future__ import annotations

import json
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
import uvicorn

from rolereward.config import ServiceConfig
from rolereward.service import create_app


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture
def live_service():
    """A real service process-in-thread bound to a local port."""
    port = free_port()
    app = create_app(ServiceConfig(port=port))
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("live service did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


class _FlakyState:
    def __init__(self) -> None:
        self.failures_remaining = 0
        self.requests: list[tuple[str, str]] = []
        self.response_body: dict = {}
        self.delay_seconds = 0.0

    def reset(self, failures: int, body: dict, delay: float = 0.0) -> None:
        self.failures_remaining = failures
        self.requests = []
        self.response_body = body
        self.delay_seconds = delay


class _FlakyHandler(BaseHTTPRequestHandler):
    state: _FlakyState

    def _serve(self) -> None:
        state = self.state
        state.requests.append((self.command, self.path))
        if state.delay_seconds:
            time.sleep(state.delay_seconds)
        if state.failures_remaining > 0:
            state.failures_remaining -= 1
            self.send_response(500)
            self.end_headers()
            self.wfile.write(b"boom")
            return
        payload = json.dumps(state.response_body).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self) -> None:  # noqa: N802  (http.server naming)
        self._serve()

    def do_POST(self) -> None:  # noqa: N802
        content_length = int(self.headers.get("Content-Length", 0))
        if content_length:
            self.rfile.read(content_length)
        self._serve()

    def log_message(self, *_args) -> None:
        pass


@pytest.fixture
def flaky_server():
    state = _FlakyState()
    handler = type("Handler", (_FlakyHandler,), {"state": state})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}", state
    server.shutdown()
    thread.join(timeout=5)


TRAJECTORY = (
    "<think>I need to describe my original form. "
    "<focus>Knowledge</focus><focus_attr>Original form</focus_attr></think>"
    "\\boxed{I was originally a fresh cream fruit cake, freshly baked.}"
)


def score_item(index: int = 0, character_id: str | None = None) -> dict:
    return {
        "request_id": f"r{index}",
        "character_id": character_id or f"c{index % 6}",
        "raw_output": TRAJECTORY,
        "gold": {
            "gold_foci": ["Knowledge"],
            "gold_attrs": {"Knowledge": "Original form"},
            "reference_response": "I used to be a fresh cream fruit cake, much loved.",
        },
    }


def profiles_payload(count: int = 6) -> list[dict]:
    return [
        {
            "character_id": f"c{i}",
            "profile_text": f"persona {i}",
            "embedding": [float(10 * (i % 3)), float(i), 0.5],
        }
        for i in range(count)
    ]

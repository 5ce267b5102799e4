"""Read-only HTTP lookup service.

Endpoints:
  GET  /health  -> {"status": "ok"} (503 {"status": "loading"} until ready)
  POST /lookup  -> {"definition": str, "k": int <= k_max} ->
                   {"results": [{"id", "word", "score"}...], "latency_ms"}
  GET  /        -> static single-page console when a static dir is set

Artifacts are immutable once loaded, so the threading server needs no
locks; each request reads shared state only.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .retrieval import VocabIndex, lookup as index_lookup

_MIME = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
    ".ico": "image/x-icon",
    ".svg": "image/svg+xml",
}


@dataclass
class LookupService:
    """Definition text -> encoded features -> ensemble -> top-k words."""

    encode: callable
    index: VocabIndex
    k_max: int = 100
    default_k: int = 10
    language: str = ""
    static_dir: str | None = None

    def lookup(self, definition: str, k: int | None = None):
        if not isinstance(definition, str) or not definition.strip():
            raise ValueError("definition must be a nonempty string")
        if k is None:
            k = self.default_k
        if not isinstance(k, int) or isinstance(k, bool) or not 1 <= k <= self.k_max:
            raise ValueError(f"k must be an integer in [1, {self.k_max}]")
        query = self.encode(definition)
        return index_lookup(self.index, query, k)


class _Handler(BaseHTTPRequestHandler):
    # The server instance carries `state` (see HttpLookupServer).
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        service = self.server.state.service
        if self.path == "/health":
            if service is None:
                self._send_json(503, {"status": "loading"})
            else:
                self._send_json(200, {"status": "ok", "language": service.language})
            return
        self._serve_static()

    def _serve_static(self):
        service = self.server.state.service
        static_dir = service.static_dir if service else None
        if not static_dir:
            self._send_json(404, {"error": "no static content configured"})
            return
        name = "index.html" if self.path in ("/", "") else self.path.lstrip("/")
        root = Path(static_dir).resolve()
        target = (root / name).resolve()
        if root not in target.parents and target != root:
            self._send_json(404, {"error": "not found"})
            return
        if not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        body = target.read_bytes()
        self.send_response(200)
        self.send_header(
            "Content-Type", _MIME.get(target.suffix, "application/octet-stream")
        )
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        if self.path != "/lookup":
            self._send_json(404, {"error": "unknown endpoint"})
            return
        service = self.server.state.service
        if service is None:
            self._send_json(503, {"status": "loading"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            payload = json.loads(raw.decode("utf-8")) if raw else {}
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._send_json(400, {"error": "request body must be JSON"})
            return
        if not isinstance(payload, dict):
            self._send_json(400, {"error": "request body must be a JSON object"})
            return
        definition = payload.get("definition")
        k = payload.get("k", service.default_k)
        started = time.perf_counter()
        try:
            results = service.lookup(definition, k)
        except ValueError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        latency_ms = (time.perf_counter() - started) * 1000.0
        self._send_json(
            200,
            {
                "results": [
                    {"id": rid, "word": word, "score": score}
                    for rid, word, score in results
                ],
                "latency_ms": latency_ms,
            },
        )


@dataclass
class _State:
    service: LookupService | None = None


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    # Deep accept backlog so initial bursts of concurrent clients are not
    # reset while handler threads spin up.
    request_queue_size = 128


class HttpLookupServer:
    """Thin wrapper owning the threading HTTP server and its state."""

    def __init__(self, service: LookupService | None, port: int = 0, host: str = "127.0.0.1"):
        self._httpd = _Server((host, port), _Handler)
        self._httpd.state = _State(service=service)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def set_service(self, service: LookupService) -> None:
        self._httpd.state.service = service

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def run_server(service: LookupService, port: int) -> None:
    """Blocking entry point used by the serve command."""
    server = HttpLookupServer(service, port=port)
    print(f"serving on http://127.0.0.1:{server.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()

"""Embedding HTTP server for trained encoders.

Speaks the same embeddings wire protocol the cache toolchain's provider
client uses — request ``{"model", "input": [texts]}``, response
``{"data": [{"index", "embedding"}]}`` — so a tuned model can be evaluated
by pointing any consumer of that protocol at this endpoint.

The single model instance is guarded by a lock: forward passes are
exclusive (correctness over throughput at desk scale).
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .encoder import HashedBagEncoder, load_model


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        length = int(self.headers.get("Content-Length") or 0)
        try:
            body = json.loads(self.rfile.read(length))
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._send_json(400, {"error": "body is not valid JSON"})
            return
        texts = body.get("input") if isinstance(body, dict) else None
        if (
            not isinstance(texts, list)
            or not texts
            or not all(isinstance(t, str) and t for t in texts)
        ):
            self._send_json(400, {"error": "'input' must be a non-empty list of strings"})
            return
        with self.server.model_lock:
            vectors = self.server.encoder.encode(texts)
        data = [
            {"index": i, "embedding": row} for i, row in enumerate(vectors.tolist())
        ]
        self._send_json(200, {"model": self.server.model_name, "data": data})


class EmbeddingServer:
    """Serves one encoder; start() in the background or serve_forever()."""

    def __init__(self, encoder: HashedBagEncoder, bind_address: str = "127.0.0.1:0",
                 model_name: str = "hashed-bag"):
        host, _, port = bind_address.rpartition(":")
        if not host:
            raise ValueError(f"bind_address must be host:port, got {bind_address!r}")
        self._httpd = ThreadingHTTPServer((host, int(port)), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.encoder = encoder
        self._httpd.model_name = model_name
        self._httpd.model_lock = threading.Lock()
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1/embeddings"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10)


def serve_embeddings(model_path: str, bind_address: str,
                     model_name: str = "hashed-bag") -> EmbeddingServer:
    """Load a saved encoder and return a started server for it."""
    server = EmbeddingServer(load_model(model_path), bind_address, model_name)
    server.start()
    return server

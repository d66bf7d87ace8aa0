"""HTTP service exposing the semantic cache.

Endpoints (JSON in, JSON out; unknown request fields are ignored):

    POST   /v1/entries        {"query", "response"}        -> 201 {"id"}
    POST   /v1/lookup         {"query", "threshold"?}      -> 200 {"hit", "similarity"?, "entry"?}
    GET    /v1/stats                                        -> 200 counters
    GET    /health                                          -> 200 {"status": "ok"}
    DELETE /v1/entries/{id}                                 -> 204 | 404

Errors: 400 malformed body, 413 oversize body, 404 unknown id/route,
502 provider failure. There is no authentication in-core; front deployments
with a gateway.

If a persist path is configured, an existing snapshot is loaded at startup
and the cache is flushed back to it on graceful shutdown.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .cache import SemanticCache, load as load_snapshot
from .config import ServerConfig, split_bind_address
from .errors import EmptyQuery, UpstreamError

logger = logging.getLogger(__name__)

_ENTRY_PATH = re.compile(r"^/v1/entries/(\d+)$")


def _entry_payload(entry) -> dict:
    return {
        "id": entry.id,
        "query_text": entry.query_text,
        "response_text": entry.response_text,
        "created_at": entry.created_at,
        "hit_count": entry.hit_count,
        "model_id": entry.model_id,
    }


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "langcache"

    # -- plumbing ----------------------------------------------------------

    def log_message(self, fmt, *args):
        logger.debug("%s %s", self.address_string(), fmt % args)

    @property
    def cache(self) -> SemanticCache:
        return self.server.cache

    def _send_json(self, status: int, payload: dict | None) -> None:
        body = b"" if payload is None else json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def _read_json_body(self) -> dict | None:
        """Parse the request body; sends the error response itself on failure."""
        length = int(self.headers.get("Content-Length") or 0)
        if length > self.server.config.max_body_bytes:
            self._send_json(413, {"error": "request body too large"})
            self.close_connection = True
            return None
        raw = self.rfile.read(length) if length else b""
        try:
            body = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._send_json(400, {"error": "request body is not valid JSON"})
            return None
        if not isinstance(body, dict):
            self._send_json(400, {"error": "request body must be a JSON object"})
            return None
        return body

    def _require_query(self, body: dict) -> str | None:
        query = body.get("query")
        if not isinstance(query, str) or not query.strip():
            self._send_json(400, {"error": "'query' must be a non-empty string"})
            return None
        return query

    # -- routes ------------------------------------------------------------

    def do_GET(self):
        if self.path == "/health":
            self._send_json(200, {"status": "ok"})
        elif self.path == "/v1/stats":
            self._send_json(200, self.cache.stats().to_dict())
        else:
            self._send_json(404, {"error": "unknown path"})

    def do_POST(self):
        if self.path == "/v1/entries":
            self._post_entry()
        elif self.path == "/v1/lookup":
            self._post_lookup()
        else:
            self._send_json(404, {"error": "unknown path"})

    def do_DELETE(self):
        match = _ENTRY_PATH.match(self.path)
        if not match:
            self._send_json(404, {"error": "unknown path"})
            return
        if self.cache.remove(int(match.group(1))):
            self._send_json(204, None)
        else:
            self._send_json(404, {"error": "no such entry"})

    def _post_entry(self):
        body = self._read_json_body()
        if body is None:
            return
        query = self._require_query(body)
        if query is None:
            return
        response = body.get("response")
        if not isinstance(response, str) or not response:
            self._send_json(400, {"error": "'response' must be a non-empty string"})
            return
        try:
            entry_id = self.cache.put(query, response)
        except EmptyQuery as exc:
            self._send_json(400, {"error": str(exc)})
        except UpstreamError as exc:
            self._send_json(502, {"error": f"embedding provider failed: {exc}"})
        else:
            self._send_json(201, {"id": entry_id})

    def _post_lookup(self):
        body = self._read_json_body()
        if body is None:
            return
        query = self._require_query(body)
        if query is None:
            return
        threshold = body.get("threshold")
        if threshold is not None:
            if not isinstance(threshold, (int, float)) or not -1.0 <= threshold <= 1.0:
                self._send_json(400, {"error": "'threshold' must be a number in [-1, 1]"})
                return
        try:
            outcome = self.cache.lookup(query, threshold_override=threshold)
        except EmptyQuery as exc:
            self._send_json(400, {"error": str(exc)})
        except UpstreamError as exc:
            self._send_json(502, {"error": f"embedding provider failed: {exc}"})
        else:
            payload = {"hit": outcome.hit}
            if outcome.similarity is not None:
                payload["similarity"] = outcome.similarity
            if outcome.hit:
                payload["entry"] = _entry_payload(outcome.entry)
            self._send_json(200, payload)


class _HttpServer(ThreadingHTTPServer):
    daemon_threads = True
    # Per-connection socket timeout; a stuck client cannot pin a handler
    # thread forever.
    request_timeout_s = 30.0

    def finish_request(self, request, client_address):
        request.settimeout(self.request_timeout_s)
        super().finish_request(request, client_address)


class CacheServer:
    """Owns the cache and the HTTP listener; start() / shutdown() lifecycle.

    Shutdown is graceful: in-flight requests finish, then the snapshot is
    flushed iff a persist path is configured.
    """

    def __init__(self, config: ServerConfig):
        self.config = config
        persist = config.cache_config.persist_path
        if persist and os.path.exists(persist):
            self.cache = load_snapshot(persist, config.provider_config, config.cache_config)
            logger.info("restored %d entries from %s", len(self.cache), persist)
        else:
            self.cache = SemanticCache(config.cache_config, config.provider_config)
        host, port = split_bind_address(config.bind_address)
        self._httpd = _HttpServer((host, port), _Handler)
        self._httpd.cache = self.cache
        self._httpd.config = config
        self._httpd.request_timeout_s = config.request_timeout_ms / 1000.0
        self._thread: threading.Thread | None = None
        self._closed = False
        self._shutdown_lock = threading.Lock()

    @property
    def address(self) -> tuple[str, int]:
        """Actual (host, port) bound, after any port-0 resolution."""
        return self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> None:
        """Serve in a background thread (returns once the socket is live)."""
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        """Serve on the calling thread until shutdown() is called."""
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        # The lock makes concurrent shutdown calls (e.g. signal handler plus
        # main thread) block until the first one has finished flushing.
        with self._shutdown_lock:
            if self._closed:
                return
            self._closed = True
            self._httpd.shutdown()
            self._httpd.server_close()
            if self._thread is not None:
                self._thread.join(timeout=10)
            if self.config.cache_config.persist_path:
                path = self.cache.save()
                logger.info("flushed snapshot to %s", path)

"""Minimal JSON-over-HTTP plumbing on the stdlib ThreadingHTTPServer.

Services declare routes as (method, path regex, handler); handlers receive a
Request and return (status, json-able body) or raise HttpError. Keep-alive
HTTP/1.1 with explicit Content-Length, one thread per connection.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit


class HttpError(Exception):
    def __init__(self, status: int, code: str, message: str = "", headers: dict | None = None):
        super().__init__(message or code)
        self.status = status
        self.code = code
        self.message = message or code
        self.headers = headers or {}


@dataclass
class Request:
    method: str
    path: str
    params: dict                  # named groups from the route pattern
    query: dict                   # first value per query key
    headers: dict
    body: bytes = b""
    extra_headers: dict = field(default_factory=dict)

    def json(self):
        if not self.body:
            raise HttpError(400, "bad_request", "empty body")
        try:
            return json.loads(self.body.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise HttpError(400, "bad_request", f"body is not valid JSON: {e}")

    def form(self):
        try:
            pairs = parse_qs(self.body.decode("utf-8"), keep_blank_values=True)
        except UnicodeDecodeError as e:
            raise HttpError(400, "bad_request", str(e))
        return {k: v[0] for k, v in pairs.items()}

    def bearer(self) -> str:
        auth = self.headers.get("authorization", "")
        if not auth.lower().startswith("bearer "):
            raise HttpError(401, "token_unknown", "missing bearer token")
        return auth[7:].strip()


@dataclass
class Route:
    method: str
    pattern: re.Pattern
    handler: object

    @classmethod
    def make(cls, method: str, path_regex: str, handler):
        return cls(method, re.compile("^" + path_regex + "$"), handler)


def _make_handler(routes: list[Route], max_body: int):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # tests run quiet
            pass

        def _respond(self, status: int, body, headers: dict | None = None):
            data = b"" if body is None else json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            for k, v in (headers or {}).items():
                self.send_header(k, str(v))
            self.end_headers()
            if data:
                self.wfile.write(data)

        def _dispatch(self, method: str):
            parts = urlsplit(self.path)
            body = b""
            length = int(self.headers.get("Content-Length") or 0)
            if length > max_body:
                self._respond(413, {"error": "payload_too_large"})
                # drain nothing; close connection to avoid desync
                self.close_connection = True
                return
            if length:
                body = self.rfile.read(length)
            query = {k: v[0] for k, v in parse_qs(parts.query, keep_blank_values=True).items()}
            headers = {k.lower(): v for k, v in self.headers.items()}
            for route in routes:
                if route.method != method:
                    continue
                m = route.pattern.match(parts.path)
                if not m:
                    continue
                request = Request(method, parts.path, m.groupdict(), query, headers, body)
                try:
                    result = route.handler(request)
                except HttpError as e:
                    self._respond(
                        e.status, {"error": e.code, "message": e.message}, e.headers
                    )
                    return
                except Exception as e:  # defensive: report, never hang the client
                    self._respond(500, {"error": "internal", "message": str(e)})
                    return
                if isinstance(result, tuple):
                    status, payload = result[0], result[1]
                    headers_out = result[2] if len(result) > 2 else None
                else:
                    status, payload, headers_out = 200, result, None
                self._respond(status, payload, headers_out)
                return
            self._respond(404, {"error": "not_found", "message": parts.path})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_PUT(self):
            self._dispatch("PUT")

        def do_DELETE(self):
            self._dispatch("DELETE")

    return Handler


class JsonService:
    """One HTTP listener running its routes on a daemon thread pool."""

    def __init__(self, bind_addr: str, routes: list[Route], max_body: int = 32 * 1024 * 1024):
        host, _, port = bind_addr.rpartition(":")
        self._server = ThreadingHTTPServer(
            (host or "127.0.0.1", int(port)), _make_handler(routes, max_body)
        )
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)

"""HTTP surface for the web console and other clients.

Plain stdlib threading HTTP server: JSON request/response bodies mirroring
the domain types, a uniform error envelope, idempotent mutations keyed by a
client-supplied request id, and a resumable server-sent-event stream of the
session log at ``GET /api/events?from=<seq>``.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .engine import Engine
from .errors import DomainError, InvalidSeq, PortInUse, SchemaViolation, UnknownQuestion
from .events import canonical_json
from .validation import decision_checklist

logger = logging.getLogger(__name__)

STREAM_POLL_SECS = 0.25

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


class ApiServer:
    """Running service handle: owns the listener thread and graceful stop."""

    def __init__(self, engine: Engine, host: str = "127.0.0.1", port: int = 0, static_dir: Optional[Path] = None):
        self.engine = engine
        self.host = host
        self.static_dir = Path(static_dir) if static_dir else None
        try:
            self._httpd = _Server((host, port), Handler)
        except OSError as exc:
            raise PortInUse(f"{host}:{port}: {exc}") from exc
        self._httpd.api = self
        self.port = self._httpd.server_address[1]
        self._thread: Optional[threading.Thread] = None
        self._idempotency: dict[str, tuple] = {}
        self._idempotency_lock = threading.Lock()
        self.stopping = threading.Event()

    def start(self) -> "ApiServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True, name="api-server")
        self._thread.start()
        return self

    def shutdown(self) -> None:
        """Stop accepting; in-flight requests run to completion."""
        self.stopping.set()
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10)

    @property
    def address(self) -> str:
        return f"http://{self.host}:{self.port}"

    # -- idempotency cache ------------------------------------------------------
    #
    # First request with an id claims it and executes; concurrent retries
    # wait for its outcome. Successes are cached forever, failures release
    # the claim so a retry may run the operation again.

    def claim(self, request_id: str) -> Optional[tuple]:
        with self._idempotency_lock:
            entry = self._idempotency.get(request_id)
            if entry is None:
                self._idempotency[request_id] = ("pending", threading.Event())
                return None
            return entry

    def complete(self, request_id: str, status: int, body: bytes) -> None:
        with self._idempotency_lock:
            entry = self._idempotency.get(request_id)
            self._idempotency[request_id] = ("done", status, body)
        if entry is not None and entry[0] == "pending":
            entry[1].set()

    def release_if_pending(self, request_id: str) -> None:
        with self._idempotency_lock:
            entry = self._idempotency.get(request_id)
            if entry is not None and entry[0] == "pending":
                del self._idempotency[request_id]
                entry[1].set()

    def cached(self, request_id: str) -> Optional[tuple[int, bytes]]:
        with self._idempotency_lock:
            entry = self._idempotency.get(request_id)
        return (entry[1], entry[2]) if entry is not None and entry[0] == "done" else None


class _Server(ThreadingHTTPServer):
    allow_reuse_address = False
    daemon_threads = True
    api: ApiServer


class Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: _Server

    # Test seam: called before a route handler runs.
    def before_response(self) -> None:
        pass

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("api: " + fmt, *args)

    # -- plumbing ---------------------------------------------------------------

    @property
    def api(self) -> ApiServer:
        return self.server.api

    @property
    def engine(self) -> Engine:
        return self.api.engine

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            return json.loads(raw.decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            raise SchemaViolation("request body is not valid JSON")

    def _send_json(self, status: int, payload, request_id: Optional[str] = None) -> None:
        body = canonical_json(payload).encode("utf-8")
        if request_id:
            self.api.complete(request_id, status, body)
        self._send_bytes(status, body, "application/json")

    def _send_bytes(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("X-Head-Seq", str(self.engine.head_seq))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_envelope(self, exc: DomainError) -> None:
        self._send_json(exc.http_status, exc.envelope())

    # -- dispatch -------------------------------------------------------------------

    def _dispatch(self, method: str) -> None:
        path, _, query = self.path.partition("?")
        request_id = None
        try:
            self.before_response()
            body = self._body() if method in ("POST", "PATCH", "DELETE") else {}
            if method in ("POST", "PATCH", "DELETE"):
                request_id = self.headers.get("X-Request-Id") or body.get("request_id")
            if request_id:
                entry = self.api.claim(request_id)
                if entry is not None:
                    if entry[0] == "pending":
                        entry[1].wait(timeout=60)
                    cached = self.api.cached(request_id)
                    if cached is not None:
                        self._send_bytes(cached[0], cached[1], "application/json")
                        return
                    # The first attempt failed and released the claim; run it.
                    self.api.claim(request_id)
            for pattern, handler_method, handler in _ROUTES:
                if handler_method != method:
                    continue
                match = pattern.match(path)
                if match:
                    handler(self, body, request_id, *match.groups(), query=query)
                    return
            if method == "GET" and self._serve_static(path):
                return
            self._send_json(404, {"code": "NotFound", "message": f"no route {method} {path}", "details": {}})
        except DomainError as exc:
            self._send_error_envelope(exc)
        except (BrokenPipeError, ConnectionResetError):
            pass
        except Exception as exc:
            logger.exception("api handler failed")
            self._send_json(500, {"code": "Internal", "message": str(exc), "details": {}})
        finally:
            if request_id:
                # Successful mutations flipped the claim to "done"; anything
                # else releases it so a retry can execute.
                self.api.release_if_pending(request_id)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PATCH(self):
        self._dispatch("PATCH")

    def do_DELETE(self):
        self._dispatch("DELETE")

    # -- routes ---------------------------------------------------------------------

    def _route_set_goal(self, body, request_id, query=""):
        goal = self.engine.set_goal(body.get("text", ""))
        self._send_json(200, goal.to_dict(), request_id)

    def _route_bank(self, body, request_id, query=""):
        self._send_json(200, self.engine.bank_view().to_dict())

    def _route_question(self, body, request_id, question_id, query=""):
        question = self.engine.question(question_id)
        if question is None:
            raise UnknownQuestion(question_id)
        self._send_json(200, question.to_dict())

    def _route_answer(self, body, request_id, question_id, query=""):
        decision = self.engine.answer_question(question_id, body.get("answer", ""), body.get("comment", ""))
        self._send_json(200, decision.to_dict(), request_id)

    def _route_dismiss(self, body, request_id, question_id, query=""):
        question = self.engine.dismiss_question(question_id)
        self._send_json(200, question.to_dict(), request_id)

    def _route_add_decision(self, body, request_id, query=""):
        decision = self.engine.add_custom_decision(body.get("title", ""), body.get("comment", ""))
        self._send_json(200, decision.to_dict(), request_id)

    def _route_edit_decision(self, body, request_id, decision_id, query=""):
        decision = self.engine.edit_decision(
            decision_id,
            new_answer=body.get("answer"),
            new_comment=body.get("comment"),
            new_title=body.get("title"),
        )
        self._send_json(200, decision.to_dict(), request_id)

    def _route_revoke_decision(self, body, request_id, decision_id, query=""):
        decision = self.engine.revoke_decision(decision_id)
        self._send_json(200, decision.to_dict(), request_id)

    def _route_implement(self, body, request_id, query=""):
        item = self.engine.trigger_implementation()
        self._send_json(202, {"kind": item.kind, "work": item.payload}, request_id)

    def _route_validate(self, body, request_id, query=""):
        report = self.engine.run_validation()
        self._send_json(200, report.to_dict(), request_id)

    def _route_latest_report(self, body, request_id, query=""):
        report = self.engine.latest_report()
        if report is None:
            self._send_json(404, {"code": "NotFound", "message": "no validation report yet", "details": {}})
            return
        payload = report.to_dict()
        payload["checklist"] = decision_checklist(report)
        self._send_json(200, payload)

    def _route_plan(self, body, request_id, query=""):
        self._send_bytes(200, self.engine.plan_text().encode("utf-8"), "text/markdown; charset=utf-8")

    def _route_events(self, body, request_id, query=""):
        params = dict(part.split("=", 1) for part in query.split("&") if "=" in part)
        try:
            after = int(params.get("from", "0"))
        except ValueError:
            raise InvalidSeq(params.get("from", ""))
        head = self.engine.head_seq
        if after < 0 or after > head:
            raise InvalidSeq(f"from={after} outside 0..{head}")
        self.close_connection = True
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.end_headers()
        cursor = after
        try:
            while not self.api.stopping.is_set():
                events = self.engine.wait_events(cursor, timeout=STREAM_POLL_SECS)
                for event in events:
                    payload = canonical_json(event.to_dict())
                    self.wfile.write(f"id: {event.seq}\ndata: {payload}\n\n".encode("utf-8"))
                    cursor = event.seq
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _serve_static(self, path: str) -> bool:
        static = self.api.static_dir
        if static is None:
            return False
        rel = "index.html" if path in ("/", "") else path.lstrip("/")
        target = (static / rel).resolve()
        if not str(target).startswith(str(static.resolve())) or not target.is_file():
            return False
        content_type = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self._send_bytes(200, target.read_bytes(), content_type)
        return True


_ROUTES = [
    (re.compile(r"^/api/goal$"), "POST", Handler._route_set_goal),
    (re.compile(r"^/api/bank$"), "GET", Handler._route_bank),
    (re.compile(r"^/api/questions/([^/]+)$"), "GET", Handler._route_question),
    (re.compile(r"^/api/questions/([^/]+)/answer$"), "POST", Handler._route_answer),
    (re.compile(r"^/api/questions/([^/]+)/dismiss$"), "POST", Handler._route_dismiss),
    (re.compile(r"^/api/decisions$"), "POST", Handler._route_add_decision),
    (re.compile(r"^/api/decisions/([^/]+)$"), "PATCH", Handler._route_edit_decision),
    (re.compile(r"^/api/decisions/([^/]+)$"), "DELETE", Handler._route_revoke_decision),
    (re.compile(r"^/api/implement$"), "POST", Handler._route_implement),
    (re.compile(r"^/api/validate$"), "POST", Handler._route_validate),
    (re.compile(r"^/api/report/latest$"), "GET", Handler._route_latest_report),
    (re.compile(r"^/api/plan$"), "GET", Handler._route_plan),
    (re.compile(r"^/api/events$"), "GET", Handler._route_events),
]


def serve(engine: Engine, host: str = "127.0.0.1", port: int = 8787, static_dir: Optional[Path] = None) -> ApiServer:
    """Start the service; raises PortInUse when the port is taken."""
    return ApiServer(engine, host=host, port=port, static_dir=static_dir).start()

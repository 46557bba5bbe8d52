"""Engine-side backend connection.

One connection per agent: sends requests, correlates responses, and pumps
`session/update` notifications to the orchestrator on a reader thread. A
closed stream or a reply deadline turns into a fault callback rather than
an exception on some arbitrary thread.
"""

from __future__ import annotations

import itertools
import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..errors import HandshakeTimeout, SessionDown
from ..wire import MessageStream, notification, request

logger = logging.getLogger(__name__)


@dataclass
class BackendEndpoint:
    """Raw byte streams to one backend plus its cleanup hook."""

    reader: object
    writer: object
    close: Callable[[], None]
    describe: str = "backend"


@dataclass
class _Pending:
    event: threading.Event = field(default_factory=threading.Event)
    result: Optional[dict] = None
    error: Optional[dict] = None
    on_done: Optional[Callable] = None


class BackendConnection:
    def __init__(
        self,
        endpoint: BackendEndpoint,
        on_notification: Callable[[str, dict], None],
        on_close: Callable[[str], None],
    ):
        self._endpoint = endpoint
        self._stream = MessageStream(endpoint.reader, endpoint.writer)
        self._on_notification = on_notification
        self._on_close = on_close
        self._pending: dict[int, _Pending] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._closed = False
        self._thread = threading.Thread(target=self._pump, daemon=True, name=f"backend-{endpoint.describe}")

    def start(self) -> None:
        self._thread.start()

    # -- outbound ---------------------------------------------------------------

    def request(self, method: str, params: dict, timeout: float) -> dict:
        """Blocking request; raises HandshakeTimeout when the reply never comes."""
        msg_id, pending = self._register()
        self._send(request(msg_id, method, params))
        if not pending.event.wait(timeout):
            with self._lock:
                self._pending.pop(msg_id, None)
            raise HandshakeTimeout(f"{self._endpoint.describe}: no reply to {method} within {timeout}s")
        return self._unwrap(pending, method)

    def request_async(self, method: str, params: dict, on_done: Callable[[Optional[dict], Optional[dict]], None]) -> int:
        """Fire a request whose reply is delivered via callback(result, error)."""
        msg_id, pending = self._register()
        pending.on_done = on_done
        self._send(request(msg_id, method, params))
        return msg_id

    def notify(self, method: str, params: dict) -> None:
        self._send(notification(method, params))

    def _register(self) -> tuple[int, _Pending]:
        with self._lock:
            msg_id = next(self._ids)
            pending = _Pending()
            self._pending[msg_id] = pending
        return msg_id, pending

    def _send(self, message: dict) -> None:
        if self._closed:
            raise SessionDown(f"{self._endpoint.describe}: connection closed")
        try:
            self._stream.send(message)
        except OSError as exc:
            raise SessionDown(f"{self._endpoint.describe}: {exc}") from exc

    @staticmethod
    def _unwrap(pending: _Pending, method: str) -> dict:
        if pending.error is not None:
            raise SessionDown(f"backend error on {method}: {pending.error.get('message')}")
        return pending.result if pending.result is not None else {}

    # -- inbound ------------------------------------------------------------------

    def _pump(self) -> None:
        reason = "backend stream closed"
        while True:
            try:
                message = self._stream.receive()
            except OSError as exc:
                reason = str(exc)
                message = None
            if message is None:
                break
            if "method" in message and "id" not in message:
                try:
                    self._on_notification(message["method"], message.get("params", {}))
                except Exception:
                    logger.exception("notification handler failed")
            elif "id" in message and ("result" in message or "error" in message):
                self._resolve(message)
            else:
                logger.warning("unexpected message from %s: %r", self._endpoint.describe, message)
        # The pump owns the stream objects: closing them from another thread
        # would deadlock against the blocking read above.
        self._stream.close()
        self._fail_pending(reason)
        if not self._closed:
            self._on_close(reason)

    def _resolve(self, message: dict) -> None:
        with self._lock:
            pending = self._pending.pop(message["id"], None)
        if pending is None:
            return
        pending.result = message.get("result")
        pending.error = message.get("error")
        pending.event.set()
        if pending.on_done is not None:
            pending.on_done(pending.result, pending.error)

    def _fail_pending(self, reason: str) -> None:
        with self._lock:
            stale = list(self._pending.values())
            self._pending.clear()
        for pending in stale:
            pending.error = {"message": reason}
            pending.event.set()
            if pending.on_done is not None:
                pending.on_done(None, pending.error)

    def close(self) -> None:
        """Shut the transport down; the pump thread then drains and exits."""
        self._closed = True
        self._endpoint.close()

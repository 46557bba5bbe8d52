"""Agent orchestration: questioner, planner, implementer.

Each role is a sequential actor with at most one in-flight backend request.
Work submitted while an agent is busy queues; queued decision-formalization
items coalesce into a single batch, queued question-generation requests are
replaced by the newest snapshot, and implementation requests run FIFO and
are never merged.

All shared-state effects (bank writes via tool calls, turn lifecycle
events) funnel through the host engine's single-writer lock.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .backends.base import BackendConnection
from .config import SessionConfig
from .errors import DomainError, SessionDown, UnknownSession

logger = logging.getLogger(__name__)

ROLES = ("questioner", "planner", "implementer")

GENERATE_QUESTIONS = "generate_questions"
FORMALIZE_DECISIONS = "formalize_decisions"
IMPLEMENT = "implement"


@dataclass
class WorkItem:
    kind: str
    payload: dict
    created_at: str = ""
    batch_members: list = field(default_factory=list)


@dataclass
class AgentEvent:
    role: str
    kind: str  # tool_call | text | turn_complete | fault
    data: dict = field(default_factory=dict)


class AgentSession:
    def __init__(self, role: str, conn: BackendConnection, backend_session_id: str):
        self.role = role
        self.conn = conn
        self.backend_session_id = backend_session_id
        self.state = "idle"  # idle | working | down
        self.queue: list[WorkItem] = []
        self.turn_counter = 0
        self.inflight_request: Optional[int] = None
        self.inflight_timer: Optional[threading.Timer] = None


class Orchestrator:
    """Drives the three agent sessions against a backend factory.

    The host engine supplies the shared lock, the event append hook, the
    tool gateway, and prompt context; the orchestrator owns session state.
    """

    def __init__(
        self,
        factory,
        config: SessionConfig,
        lock: threading.RLock,
        append_event: Callable[[str, dict], object],
        call_tool: Callable[[str, str, dict], dict],
        project_root: Optional[Path] = None,
    ):
        self._factory = factory
        self._config = config
        self._lock = lock
        self._idle = threading.Condition(lock)
        self._append_event = append_event
        self._call_tool = call_tool
        self._project_root = project_root
        self.sessions: dict[str, AgentSession] = {}
        self._shutting_down = False
        self.on_text: Optional[Callable[[str, str], None]] = None

    # -- lifecycle ----------------------------------------------------------------

    def start_session(self) -> dict[str, AgentSession]:
        """Spawn and handshake all three roles; all start idle."""
        try:
            for role in ROLES:
                endpoint = self._factory.connect(role)
                conn = BackendConnection(
                    endpoint,
                    on_notification=lambda method, params, r=role: self._on_notification(r, method, params),
                    on_close=lambda reason, r=role: self._on_backend_closed(r, reason),
                )
                conn.start()
                try:
                    conn.request("initialize", {"protocol_version": 1, "client": "aporia"}, self._config.handshake_timeout_secs)
                    reply = conn.request(
                        "session/new",
                        {"cwd": str(self._project_root) if self._project_root else ""},
                        self._config.handshake_timeout_secs,
                    )
                except DomainError:
                    conn.close()
                    raise
                session_id = reply.get("sessionId", role)
                self.sessions[role] = AgentSession(role, conn, session_id)
        except Exception:
            self.stop()
            raise
        return dict(self.sessions)

    def stop(self) -> None:
        with self._lock:
            self._shutting_down = True
            sessions = list(self.sessions.values())
        for session in sessions:
            if session.inflight_timer is not None:
                session.inflight_timer.cancel()
            session.conn.close()

    # -- work submission -------------------------------------------------------------

    def submit_work(self, role: str, item: WorkItem) -> str:
        """Dispatch now when idle, otherwise queue (with per-kind coalescing)."""
        with self._lock:
            session = self.sessions.get(role)
            if session is None or session.state == "down":
                raise SessionDown(f"no live {role} session")
            if session.state == "idle":
                self._dispatch(session, item)
                return "accepted"
            self._enqueue(session, item)
            return "queued"

    def _enqueue(self, session: AgentSession, item: WorkItem) -> None:
        if item.kind == FORMALIZE_DECISIONS:
            for queued in session.queue:
                if queued.kind == FORMALIZE_DECISIONS:
                    queued.batch_members.extend(item.batch_members)
                    queued.payload["deltas"].extend(item.payload["deltas"])
                    return
        elif item.kind == GENERATE_QUESTIONS:
            for i, queued in enumerate(session.queue):
                if queued.kind == GENERATE_QUESTIONS:
                    session.queue[i] = item
                    return
        session.queue.append(item)

    def _dispatch(self, session: AgentSession, item: WorkItem) -> None:
        turn = session.turn_counter
        session.turn_counter += 1
        session.state = "working"
        self._append_event("AgentTurnStarted", {"role": session.role, "turn": turn, "work": item.kind})
        params = {
            "sessionId": session.backend_session_id,
            "prompt": self._build_prompt(session.role, item),
            "work": item.payload,
        }
        timer = threading.Timer(self._config.turn_timeout_secs, self._on_turn_timeout, args=(session.role, turn))
        timer.daemon = True
        session.inflight_timer = timer
        try:
            session.inflight_request = session.conn.request_async(
                "session/prompt",
                params,
                on_done=lambda result, error, r=session.role, t=turn: self._on_turn_done(r, t, result, error),
            )
        except SessionDown:
            timer.cancel()
            self._fault(session, "backend unreachable on dispatch")
            return
        timer.start()

    def _build_prompt(self, role: str, item: WorkItem) -> str:
        template = load_prompt_template(role, self._config.prompts_dir)
        return template.replace("{work}", json.dumps(item.payload, indent=2, sort_keys=True))

    # -- backend events ------------------------------------------------------------------

    def _on_notification(self, role: str, method: str, params: dict) -> None:
        if method != "session/update":
            logger.debug("ignoring notification %s from %s", method, role)
            return
        update = params.get("sessionUpdate")
        if update == "tool_call":
            self.on_agent_event(AgentEvent(role=role, kind="tool_call", data=params))
        elif update == "text":
            self.on_agent_event(AgentEvent(role=role, kind="text", data=params))

    def _on_turn_done(self, role: str, turn: int, result, error) -> None:
        if error is not None:
            with self._lock:
                if self._shutting_down:
                    return
            self.on_agent_event(AgentEvent(role=role, kind="fault", data={"reason": error.get("message", "backend error")}))
            return
        self.on_agent_event(AgentEvent(role=role, kind="turn_complete", data={"turn": turn, "result": result or {}}))

    def _on_turn_timeout(self, role: str, turn: int) -> None:
        with self._lock:
            session = self.sessions.get(role)
            if session is None or session.state != "working" or session.turn_counter - 1 != turn:
                return
        self.on_agent_event(AgentEvent(role=role, kind="fault", data={"reason": f"turn {turn} timed out"}))

    def _on_backend_closed(self, role: str, reason: str) -> None:
        with self._lock:
            if self._shutting_down:
                return
            session = self.sessions.get(role)
            if session is None or session.state == "down":
                return
        self.on_agent_event(AgentEvent(role=role, kind="fault", data={"reason": f"backend exited: {reason}"}))

    def on_agent_event(self, event: AgentEvent) -> None:
        """Route one agent event: tool calls to the gateway, turn completions
        to the queue, faults to a session-down transition."""
        session = self.sessions.get(event.role)
        if session is None:
            raise UnknownSession(event.role)
        if event.kind == "tool_call":
            self._handle_tool_call(session, event.data)
        elif event.kind == "text":
            if self.on_text is not None:
                self.on_text(event.role, event.data.get("text", ""))
        elif event.kind == "turn_complete":
            self._handle_turn_complete(session, event.data)
        elif event.kind == "fault":
            with self._lock:
                self._fault(session, event.data.get("reason", "unknown fault"))

    def _handle_tool_call(self, session: AgentSession, data: dict) -> None:
        call_id = data.get("toolCallId", "")
        try:
            result = self._call_tool(data.get("tool", ""), session.role, data.get("args", {}))
            reply = {"toolCallId": call_id, "result": result}
        except DomainError as exc:
            reply = {"toolCallId": call_id, "error": exc.envelope()}
        try:
            session.conn.notify("tool_result", reply)
        except SessionDown:
            logger.warning("could not deliver tool result to %s", session.role)

    def _handle_turn_complete(self, session: AgentSession, data: dict) -> None:
        with self._lock:
            if session.state != "working":
                return
            if session.inflight_timer is not None:
                session.inflight_timer.cancel()
                session.inflight_timer = None
            session.inflight_request = None
            session.state = "idle"
            self._append_event(
                "AgentTurnCompleted",
                {"role": session.role, "turn": data.get("turn", session.turn_counter - 1),
                 "stop_reason": (data.get("result") or {}).get("stop_reason", "end_turn")},
            )
            if session.queue:
                self._dispatch(session, session.queue.pop(0))
            self._idle.notify_all()

    def _fault(self, session: AgentSession, reason: str) -> None:
        if session.state == "down":
            return
        if session.inflight_timer is not None:
            session.inflight_timer.cancel()
            session.inflight_timer = None
        session.state = "down"
        logger.error("agent %s faulted: %s", session.role, reason)
        self._append_event("AgentFault", {"role": session.role, "reason": reason})
        self._idle.notify_all()

    # -- synchronization ------------------------------------------------------------

    def wait_idle(self, timeout: float = 30.0, roles=None) -> bool:
        """Block until every (live) session is idle with an empty queue."""
        roles = roles or ROLES

        def settled() -> bool:
            for role in roles:
                session = self.sessions.get(role)
                if session is None or session.state == "down":
                    continue
                if session.state != "idle" or session.queue:
                    return False
            return True

        with self._idle:
            return self._idle.wait_for(settled, timeout)

    def session_states(self) -> dict[str, str]:
        with self._lock:
            return {role: s.state for role, s in self.sessions.items()}


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

_PROMPTS_PKG_DIR = Path(__file__).parent / "prompts"


def load_prompt_template(role: str, prompts_dir: str = "") -> str:
    """Role instructions live in versioned config files, not code."""
    base = Path(prompts_dir) if prompts_dir else _PROMPTS_PKG_DIR
    path = base / f"{role}.md"
    if not path.is_file() and prompts_dir:
        path = _PROMPTS_PKG_DIR / f"{role}.md"
    return path.read_text(encoding="utf-8")

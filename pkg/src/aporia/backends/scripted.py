"""Scripted agent backend.

A deterministic stand-in for a real coding agent: it speaks the same
newline-delimited JSON-RPC protocol, replays fixture-defined turns, and
records every prompt it receives to a transcript file so tests can assert
on exactly what the orchestrator sent and when.

Fixture document (JSON)::

    {
      "roles": {
        "questioner": {
          "handshake": "ok",            # or "silent" (never reply)
          "turns": [
            {"updates": [
               {"kind": "text", "text": "thinking..."},
               {"kind": "tool_call", "tool": "submit_argument", "args": {...}},
               {"kind": "write_file", "path": "tests/test_x.py", "content": "..."}
             ],
             "hold": false,             # wait for an explicit release
             "crash": false,            # drop the stream instead of replying
             "result": "done"}
          ]
        }
      }
    }

Turns beyond the scripted list complete immediately with no updates.
``tool_call`` args may reference the structured work the prompt carried via
"${work...}" strings, e.g. ``"${work.deltas[0].decision.id}"``.
"""

from __future__ import annotations

import json
import re
import socket
import threading
import time
from pathlib import Path
from typing import Callable, Optional

from ..errors import BackendSpawnFailure
from ..wire import MessageStream, notification, response
from .base import BackendEndpoint

_SUBST_RE = re.compile(r"^\$\{([^}]+)\}$")
_WAIT_SAFETY_SECS = 30.0


def load_fixture(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def resolve_template(value, work: dict):
    """Recursively substitute "${work.path[0].to.value}" strings."""
    if isinstance(value, str):
        m = _SUBST_RE.match(value)
        if m:
            return _lookup(work, m.group(1))
        return value
    if isinstance(value, list):
        return [resolve_template(v, work) for v in value]
    if isinstance(value, dict):
        return {k: resolve_template(v, work) for k, v in value.items()}
    return value


def _lookup(work: dict, expr: str):
    if expr == "work" or expr.startswith("work.") or expr.startswith("work["):
        expr = expr[4:].lstrip(".")
    node = work
    for part in re.finditer(r"([A-Za-z_][A-Za-z0-9_]*)|\[(\d+)\]", expr):
        key, index = part.group(1), part.group(2)
        node = node[key] if key is not None else node[int(index)]
    return node


class Transcript:
    """Shared JSONL recorder for everything the scripted agents receive."""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self.records: list[dict] = []
        self._lock = threading.Lock()

    def record(self, entry: dict) -> None:
        with self._lock:
            self.records.append(entry)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")

    def prompts(self, role: Optional[str] = None) -> list[dict]:
        with self._lock:
            return [r for r in self.records if r["kind"] == "prompt" and (role is None or r["role"] == role)]


class ScriptedAgent:
    """One role's side of the protocol.

    The serve loop never blocks on turn playback: prompts run on their own
    thread so tool results and later messages can still be read.
    """

    def __init__(
        self,
        role: str,
        script: dict,
        transcript: Transcript,
        gates: dict,
        project_root: Optional[Path],
        shutdown: Optional[Callable[[], None]] = None,
    ):
        self.role = role
        self.script = script
        self.transcript = transcript
        self.gates = gates
        self.project_root = project_root
        self.shutdown = shutdown
        self.turn_index = 0
        self.tool_results: dict[str, dict] = {}
        self._tool_done: dict[str, threading.Event] = {}
        self._tool_counter = 0

    def serve(self, stream: MessageStream) -> None:
        while True:
            try:
                message = stream.receive()
            except OSError:
                return
            if message is None:
                return
            if "method" not in message:
                continue
            method = message["method"]
            if "id" not in message:
                if method == "tool_result":
                    params = message.get("params", {})
                    self.tool_results[params.get("toolCallId", "")] = params
                    done = self._tool_done.get(params.get("toolCallId"))
                    if done is not None:
                        done.set()
                continue
            if method == "initialize":
                if self.script.get("handshake", "ok") == "silent":
                    continue
                stream.send(response(message["id"], {"protocol_version": 1, "agent": "scripted"}))
            elif method == "session/new":
                params = message.get("params", {})
                if params.get("cwd"):
                    self.project_root = Path(params["cwd"])
                stream.send(response(message["id"], {"sessionId": f"scripted-{self.role}"}))
            elif method == "session/prompt":
                turn = self.turn_index
                self.turn_index += 1
                threading.Thread(
                    target=self._run_turn,
                    args=(stream, message, turn),
                    daemon=True,
                    name=f"scripted-{self.role}-turn{turn}",
                ).start()
            else:
                stream.send(response(message["id"], {}))

    # -- turn playback -----------------------------------------------------------

    def _run_turn(self, stream: MessageStream, message: dict, turn: int) -> None:
        try:
            self._play_turn(stream, message, turn)
        except OSError:
            pass  # engine went away mid-turn; nothing left to reply to

    def _play_turn(self, stream: MessageStream, message: dict, turn: int) -> None:
        params = message.get("params", {})
        turns = self.script.get("turns", [])
        spec = turns[turn] if turn < len(turns) else self.script.get("default_turn", {})
        work = params.get("work", {})
        entry = {
            "kind": "prompt",
            "role": self.role,
            "turn": turn,
            "prompt": params.get("prompt", ""),
            "work": work,
            "t_start": time.monotonic(),
        }

        if spec.get("hold"):
            self.gates.setdefault((self.role, turn), threading.Event()).wait(_WAIT_SAFETY_SECS)

        for update in spec.get("updates", []):
            kind = update.get("kind")
            if kind == "text":
                stream.send(notification("session/update", {
                    "sessionUpdate": "text",
                    "role": self.role,
                    "text": update.get("text", ""),
                }))
            elif kind == "tool_call":
                self._tool_counter += 1
                call_id = f"{self.role}-t{self._tool_counter}"
                done = threading.Event()
                self._tool_done[call_id] = done
                stream.send(notification("session/update", {
                    "sessionUpdate": "tool_call",
                    "role": self.role,
                    "toolCallId": call_id,
                    "tool": update["tool"],
                    "args": resolve_template(update.get("args", {}), work),
                }))
                done.wait(_WAIT_SAFETY_SECS)
            elif kind == "write_file" and self.project_root is not None:
                target = self.project_root / update["path"]
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(update.get("content", ""), encoding="utf-8")

        entry["t_end"] = time.monotonic()
        self.transcript.record(entry)
        if spec.get("crash"):
            if self.shutdown is not None:
                self.shutdown()
            return
        stream.send(response(message["id"], {"stop_reason": "end_turn", "result": spec.get("result", "")}))


class ScriptedBackendFactory:
    """Connects in-process scripted agents over real byte streams.

    Each role gets a socketpair: the engine drives one end, the scripted
    agent serves the other on a daemon thread. ``release(role, turn)`` opens
    a held turn's gate.
    """

    def __init__(self, fixture: dict, transcript_path: Optional[Path] = None, project_root: Optional[Path] = None):
        self.fixture = fixture
        self.transcript = Transcript(transcript_path)
        self.project_root = Path(project_root) if project_root else None
        self._gates: dict[tuple[str, int], threading.Event] = {}
        self.agents: dict[str, ScriptedAgent] = {}

    def connect(self, role: str) -> BackendEndpoint:
        roles = self.fixture.get("roles", {})
        if role not in roles:
            raise BackendSpawnFailure(f"fixture defines no script for role {role!r}")
        engine_sock, agent_sock = socket.socketpair()

        def drop_agent_side():
            try:
                agent_sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass

        agent = ScriptedAgent(
            role, roles[role], self.transcript, self._gates, self.project_root, shutdown=drop_agent_side
        )
        self.agents[role] = agent
        agent_stream = MessageStream(agent_sock.makefile("rb"), agent_sock.makefile("wb"))

        def run():
            try:
                agent.serve(agent_stream)
            finally:
                agent_stream.close()
                agent_sock.close()

        threading.Thread(target=run, daemon=True, name=f"scripted-{role}").start()

        reader = engine_sock.makefile("rb")
        writer = engine_sock.makefile("wb")

        def close():
            # shutdown (not close) unblocks any thread inside a blocking read
            try:
                engine_sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                engine_sock.close()
            except OSError:
                pass

        return BackendEndpoint(reader=reader, writer=writer, close=close, describe=f"scripted:{role}")

    def gate(self, role: str, turn: int) -> threading.Event:
        return self._gates.setdefault((role, turn), threading.Event())

    def release(self, role: str, turn: int) -> None:
        self.gate(role, turn).set()

"""Append-only session store.

Owns the on-disk session directory:

    <session_dir>/
      events.jsonl   one canonical JSON object per line, LF, UTF-8
      meta.json      session id, project root, created_at, config snapshot
      plan.md        rendered plan (written by the engine)
      links.json     decision -> suite traceability sidecar
      reports/       validation reports
      lock           single-writer lock file

Appends are flushed and fsynced before returning; a torn trailing line is
dropped (with a warning) on load, mid-file corruption is an error.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Optional

from .config import SessionConfig
from .errors import CorruptLog, IoFailure, SessionLocked, StoreClosed, UnknownSession
from .events import EVENT_KINDS, SessionEvent, canonical_json, event_line
from .ids import Clock

logger = logging.getLogger(__name__)

META_VERSION = 1


class SessionStore:
    """Single-writer append-only event log for one session."""

    def __init__(self, session_dir: Path, clock: Optional[Clock] = None):
        self.session_dir = Path(session_dir)
        self._clock = clock or Clock()
        self._file = None
        self._seq = 0
        self._lock_path = self.session_dir / "lock"
        self._events_path = self.session_dir / "events.jsonl"

    # -- lifecycle -----------------------------------------------------------

    @classmethod
    def create(
        cls,
        session_dir: Path,
        session_id: str,
        project_root: Path,
        config: SessionConfig,
        clock: Optional[Clock] = None,
    ) -> "SessionStore":
        session_dir = Path(session_dir)
        session_dir.mkdir(parents=True, exist_ok=True)
        (session_dir / "reports").mkdir(exist_ok=True)
        store = cls(session_dir, clock=clock)
        meta = {
            "version": META_VERSION,
            "session_id": session_id,
            "project_root": str(project_root),
            "created_at": store._clock.now(),
            "config": config.to_dict(),
        }
        (session_dir / "meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        store._open_for_append()
        return store

    @classmethod
    def open(cls, session_dir: Path, clock: Optional[Clock] = None) -> "SessionStore":
        session_dir = Path(session_dir)
        if not (session_dir / "meta.json").is_file():
            raise UnknownSession(f"no session at {session_dir}")
        store = cls(session_dir, clock=clock)
        store._seq = len(store.load_events())
        store._open_for_append()
        return store

    def _open_for_append(self) -> None:
        self._acquire_lock()
        try:
            self._file = open(self._events_path, "ab")
        except OSError as exc:
            self._release_lock()
            raise IoFailure(str(exc)) from exc

    def _acquire_lock(self) -> None:
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise SessionLocked(f"session locked by {self._lock_path}")
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))

    def _release_lock(self) -> None:
        try:
            self._lock_path.unlink()
        except FileNotFoundError:
            pass

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None
            self._release_lock()

    def __enter__(self) -> "SessionStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- meta ------------------------------------------------------------------

    def meta(self) -> dict:
        return json.loads((self.session_dir / "meta.json").read_text(encoding="utf-8"))

    @property
    def project_root(self) -> Path:
        return Path(self.meta()["project_root"])

    @property
    def session_id(self) -> str:
        return self.meta()["session_id"]

    def load_config(self) -> SessionConfig:
        return SessionConfig.from_dict(self.meta()["config"])

    # -- append / load -----------------------------------------------------------

    @property
    def head_seq(self) -> int:
        return self._seq

    def append(self, kind: str, payload: dict) -> SessionEvent:
        """Append one event; it is durable (flushed + fsynced) on return."""
        if self._file is None:
            raise StoreClosed("append on closed store")
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        event = SessionEvent(seq=self._seq + 1, ts=self._clock.now(), kind=kind, payload=payload)
        try:
            self._file.write(event_line(event).encode("utf-8") + b"\n")
            self._file.flush()
            os.fsync(self._file.fileno())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self._seq = event.seq
        return event

    def load_events(self) -> list[SessionEvent]:
        return load_events(self._events_path)


def load_events(events_path: Path) -> list[SessionEvent]:
    """Read an event log, tolerating a torn trailing write.

    A final line that is truncated (no LF) or unparseable is dropped with a
    warning; anything wrong before that point raises :class:`CorruptLog`.
    """
    events_path = Path(events_path)
    if not events_path.exists():
        return []
    data = events_path.read_bytes()
    events: list[SessionEvent] = []
    lines = data.split(b"\n")
    # A well-formed log ends with LF, so the final split element is empty.
    torn_tail = lines[-1] != b""
    body, tail = (lines[:-1], lines[-1]) if torn_tail else (lines[:-1], None)
    for i, raw in enumerate(body):
        if not raw.strip():
            continue
        last_complete = i == len(body) - 1
        try:
            record = json.loads(raw.decode("utf-8"))
            event = SessionEvent.from_dict(record)
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            if last_complete and tail is None:
                # Torn write that still managed to emit the newline.
                logger.warning("dropping torn trailing record in %s: %s", events_path, exc)
                break
            raise CorruptLog(f"{events_path}: bad record at line {i + 1}: {exc}") from exc
        if event.seq != len(events) + 1:
            raise CorruptLog(f"{events_path}: seq gap at line {i + 1} (got {event.seq}, want {len(events) + 1})")
        events.append(event)
    if torn_tail and tail:
        logger.warning("dropping torn trailing record in %s (no newline)", events_path)
    return events


def load_session_events(session_dir: Path) -> list[SessionEvent]:
    session_dir = Path(session_dir)
    if not (session_dir / "meta.json").is_file():
        raise UnknownSession(f"no session at {session_dir}")
    return load_events(session_dir / "events.jsonl")


def write_sidecar(path: Path, obj) -> None:
    """Write a JSON sidecar (links.json, reports) with stable field order."""
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def canonical_sidecar(obj) -> str:
    return canonical_json(obj)

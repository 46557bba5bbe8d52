"""Session events and their canonical serialization.

All engine state is a fold over these events. The canonical JSON form
(sorted keys, minimal separators, UTF-8) is what gets written to
``events.jsonl`` and hashed by ``snapshot_digest``, so it must never drift.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Iterable

EVENT_KINDS = frozenset({
    "GoalSet",
    "QuestionIngested",
    "QuestionAnswered",
    "QuestionDismissed",
    "DecisionRecorded",
    "DecisionRevised",
    "DecisionRevoked",
    "SuiteLinked",
    "SuiteRemapped",
    "ImplementTriggered",
    "AgentTurnStarted",
    "AgentTurnCompleted",
    "AgentFault",
    "ValidationCompleted",
})


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    ts: str
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_dict(cls, data: dict) -> "SessionEvent":
        return cls(seq=data["seq"], ts=data["ts"], kind=data["kind"], payload=data["payload"])


def canonical_json(obj: Any) -> str:
    """Stable serialization: sorted keys, no whitespace, raw UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def event_line(event: SessionEvent) -> str:
    return canonical_json(event.to_dict())


def snapshot_digest(events: Iterable[SessionEvent]) -> str:
    """Content hash over the canonical event log.

    Equal logs hash equal on every platform. The empty log hashes to
    sha256(b"") = ``e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855``.
    """
    h = hashlib.sha256()
    first = True
    for ev in events:
        if not first:
            h.update(b"\n")
        h.update(event_line(ev).encode("utf-8"))
        first = False
    return h.hexdigest()

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from aporia.config import SessionConfig
from aporia.errors import CorruptLog, SessionLocked, StoreClosed, UnknownSession
from aporia.events import SessionEvent, snapshot_digest
from aporia.ids import FixedClock
from aporia.store import SessionStore, load_events

EMPTY_DIGEST = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def make_store(tmp_path, name="s"):
    root = tmp_path / "proj"
    root.mkdir(exist_ok=True)
    return SessionStore.create(tmp_path / name, "sid-1", root, SessionConfig(), clock=FixedClock())


def test_first_append_gets_seq_one(tmp_path):
    with make_store(tmp_path) as store:
        event = store.append("GoalSet", {"goal_id": "g", "text": "x", "created_at": "t"})
        assert event.seq == 1


def test_thousand_appends_are_gapless(tmp_path):
    with make_store(tmp_path) as store:
        for i in range(1000):
            store.append("AgentTurnStarted", {"role": "planner", "turn": i, "work": "w"})
        events = store.load_events()
    assert [e.seq for e in events] == list(range(1, 1001))


def test_append_after_close_raises(tmp_path):
    store = make_store(tmp_path)
    store.close()
    with pytest.raises(StoreClosed):
        store.append("GoalSet", {})


def test_write_then_load_round_trips(tmp_path):
    store = make_store(tmp_path)
    written = [store.append("AgentFault", {"role": "questioner", "reason": f"r{i}"}) for i in range(5)]
    store.close()
    loaded = SessionStore.open(tmp_path / "s", clock=FixedClock()).load_events()
    assert loaded == written


def test_torn_trailing_write_is_dropped_with_warning(tmp_path, caplog):
    store = make_store(tmp_path)
    for i in range(5):
        store.append("AgentFault", {"role": "planner", "reason": f"r{i}"})
    store.close()
    path = tmp_path / "s" / "events.jsonl"
    data = path.read_bytes()
    # Cut into the middle of the last record.
    path.write_bytes(data[: len(data) - 12])
    with caplog.at_level("WARNING"):
        events = load_events(path)
    assert len(events) == 4
    assert any("torn" in r.message for r in caplog.records)


def test_midfile_corruption_raises(tmp_path):
    store = make_store(tmp_path)
    for i in range(3):
        store.append("AgentFault", {"role": "planner", "reason": f"r{i}"})
    store.close()
    path = tmp_path / "s" / "events.jsonl"
    lines = path.read_bytes().split(b"\n")
    lines[1] = b"{not json"
    path.write_bytes(b"\n".join(lines))
    with pytest.raises(CorruptLog):
        load_events(path)


def test_seq_gap_is_corrupt(tmp_path):
    store = make_store(tmp_path)
    for i in range(3):
        store.append("AgentFault", {"role": "planner", "reason": f"r{i}"})
    store.close()
    path = tmp_path / "s" / "events.jsonl"
    lines = path.read_text(encoding="utf-8").splitlines()
    del lines[1]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(CorruptLog):
        load_events(path)


def test_open_missing_session_raises(tmp_path):
    with pytest.raises(UnknownSession):
        SessionStore.open(tmp_path / "nope")


def test_single_writer_lock(tmp_path):
    store = make_store(tmp_path)
    with pytest.raises(SessionLocked):
        SessionStore.open(tmp_path / "s")
    store.close()
    SessionStore.open(tmp_path / "s").close()


def test_empty_log_digest_is_documented_constant():
    assert snapshot_digest([]) == EMPTY_DIGEST


def test_equal_logs_hash_equal_and_one_field_flip_differs(tmp_path):
    events = [
        SessionEvent(seq=1, ts="2026-01-01T00:00:00.000000Z", kind="GoalSet", payload={"goal_id": "g", "text": "x"}),
        SessionEvent(seq=2, ts="2026-01-01T00:00:01.000000Z", kind="QuestionDismissed", payload={"question_id": "q"}),
    ]
    clone = [SessionEvent.from_dict(json.loads(json.dumps(e.to_dict()))) for e in events]
    assert snapshot_digest(events) == snapshot_digest(clone)
    mutated = [events[0], SessionEvent(seq=2, ts=events[1].ts, kind="QuestionDismissed", payload={"question_id": "Q"})]
    assert snapshot_digest(events) != snapshot_digest(mutated)


def test_append_survives_process_kill(tmp_path):
    session_dir = tmp_path / "kill-session"
    project = tmp_path / "proj"
    project.mkdir(exist_ok=True)
    script = (
        "import os, sys\n"
        "from aporia.store import SessionStore\n"
        "from aporia.config import SessionConfig\n"
        f"store = SessionStore.create({str(session_dir)!r}, 'sid', {str(project)!r}, SessionConfig())\n"
        "store.append('GoalSet', {'goal_id': 'g', 'text': 'durable', 'created_at': 't'})\n"
        "os._exit(1)\n"
    )
    proc = subprocess.run([sys.executable, "-c", script], capture_output=True)
    assert proc.returncode == 1
    events = load_events(session_dir / "events.jsonl")
    assert len(events) == 1
    assert events[0].payload["text"] == "durable"

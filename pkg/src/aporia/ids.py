"""Id and clock sources.

The engine issues UUIDv4 strings for every entity. Both the id source and
the clock are injectable so scripted sessions and golden transcripts can be
made byte-for-byte reproducible.
"""

from __future__ import annotations

import random
import uuid
from datetime import datetime, timedelta, timezone


class IdSource:
    """Issues fresh UUIDv4 strings."""

    def new_id(self) -> str:
        return str(uuid.uuid4())


class SeededIds(IdSource):
    """Deterministic UUIDv4 stream from a seed (tests, replay-script)."""

    def __init__(self, seed: int = 0):
        self._rng = random.Random(seed)

    def new_id(self) -> str:
        raw = bytes(self._rng.getrandbits(8) for _ in range(16))
        return str(uuid.UUID(bytes=raw, version=4))


class Clock:
    """UTC wall clock, formatted as ISO-8601 with a trailing Z."""

    def now(self) -> str:
        return format_ts(datetime.now(timezone.utc))


class FixedClock(Clock):
    """Logical clock: starts at a fixed instant, advances 1s per reading."""

    def __init__(self, start: str = "2026-01-01T00:00:00.000000Z"):
        self._current = parse_ts(start)

    def now(self) -> str:
        ts = format_ts(self._current)
        self._current += timedelta(seconds=1)
        return ts


def format_ts(dt: datetime) -> str:
    return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_ts(ts: str) -> datetime:
    return datetime.strptime(ts, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)

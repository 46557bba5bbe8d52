"""Newline-delimited JSON-RPC 2.0 framing.

Both agent backends (real subprocess and scripted stand-in) speak this over
a bidirectional byte stream: one UTF-8 JSON object per LF-terminated line.
"""

from __future__ import annotations

import json
import threading
from typing import Optional


def request(msg_id, method: str, params: dict) -> dict:
    return {"jsonrpc": "2.0", "id": msg_id, "method": method, "params": params}


def notification(method: str, params: dict) -> dict:
    return {"jsonrpc": "2.0", "method": method, "params": params}


def response(msg_id, result) -> dict:
    return {"jsonrpc": "2.0", "id": msg_id, "result": result}


def error_response(msg_id, code: int, message: str, data: Optional[dict] = None) -> dict:
    err = {"code": code, "message": message}
    if data is not None:
        err["data"] = data
    return {"jsonrpc": "2.0", "id": msg_id, "error": err}


class MessageStream:
    """Thread-safe writer + blocking reader over binary file objects."""

    def __init__(self, reader, writer):
        self._reader = reader
        self._writer = writer
        self._write_lock = threading.Lock()

    def send(self, message: dict) -> None:
        data = json.dumps(message, ensure_ascii=False).encode("utf-8") + b"\n"
        with self._write_lock:
            self._writer.write(data)
            self._writer.flush()

    def receive(self) -> Optional[dict]:
        """Next message, or None on EOF. Skips blank/garbled lines."""
        while True:
            line = self._reader.readline()
            if not line:
                return None
            line = line.strip()
            if not line:
                continue
            try:
                return json.loads(line.decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                continue

    def close(self) -> None:
        with self._write_lock:
            try:
                self._writer.close()
            except (OSError, ValueError):
                pass
        try:
            self._reader.close()
        except (OSError, ValueError):
            pass

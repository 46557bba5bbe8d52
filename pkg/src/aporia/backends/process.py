"""Subprocess agent backend.

Spawns one agent process per role and talks the wire protocol over its
stdin/stdout. The command template may mention ``{role}``; stderr is
inherited so agent diagnostics reach the operator's terminal.
"""

from __future__ import annotations

import shlex
import subprocess

from ..errors import BackendSpawnFailure
from .base import BackendEndpoint


class ProcessBackendFactory:
    def __init__(self, command_template: str):
        if not command_template.strip():
            raise BackendSpawnFailure("empty backend command")
        self.command_template = command_template

    def connect(self, role: str) -> BackendEndpoint:
        argv = [part.replace("{role}", role) for part in shlex.split(self.command_template)]
        try:
            proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise BackendSpawnFailure(f"cannot start backend for role {role!r}: {exc}") from exc

        def close():
            if proc.poll() is None:
                proc.terminate()
                try:
                    proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    proc.kill()
                    proc.wait()

        return BackendEndpoint(reader=proc.stdout, writer=proc.stdin, close=close, describe=f"process:{role}")

"""Run one scripted agent over stdio.

Lets the process backend be exercised against a real subprocess:

    python -m aporia.backends.scripted_main --fixture f.json --role questioner
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from ..wire import MessageStream
from .scripted import ScriptedAgent, Transcript, load_fixture


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="scripted-agent")
    parser.add_argument("--fixture", required=True)
    parser.add_argument("--role", required=True)
    parser.add_argument("--transcript", default=None)
    parser.add_argument("--project-root", default=None)
    args = parser.parse_args(argv)

    fixture = load_fixture(args.fixture)
    script = fixture.get("roles", {}).get(args.role)
    if script is None:
        print(f"no script for role {args.role}", file=sys.stderr)
        return 1
    transcript = Transcript(Path(args.transcript) if args.transcript else None)
    agent = ScriptedAgent(
        role=args.role,
        script=script,
        transcript=transcript,
        gates={},
        project_root=Path(args.project_root) if args.project_root else None,
        shutdown=lambda: os._exit(0),
    )
    stream = MessageStream(sys.stdin.buffer, sys.stdout.buffer)
    agent.serve(stream)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

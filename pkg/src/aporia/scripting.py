"""Deterministic end-to-end session scripts.

A script is a line-oriented file: directives first (``project``,
``backend``, ``config``), then CLI verb lines executed against one shared
engine. The driver copies the target project into the work directory, uses
seeded ids and a logical clock, waits for agents to go idle between steps,
and records a transcript suitable for golden comparison.

    # demo.script
    project demo_project
    backend scripted:demo_backend.json
    config test.command_template "python3 -m pytest {path}::{suite} --junit-xml={report} -q"
    goal set "Add explicit access control"
    questions answer @q1 --yes

``@qN`` / ``@dN`` reference the Nth ingested question / recorded decision.
"""

from __future__ import annotations

import io
import shlex
import shutil
import tempfile
from pathlib import Path
from typing import Optional

from . import cli
from .config import SessionConfig
from .engine import Engine
from .errors import DomainError, ScriptParse, StepFailed
from .ids import FixedClock, SeededIds

_FORBIDDEN_VERBS = {"init", "serve", "replay-script"}

_CONFIG_KEYS = {
    "display_cap": ("display_cap", int),
    "test.command_template": ("command_template", str),
    "test.report_format": ("report_format", str),
    "test.timeout_secs": ("timeout_secs", float),
}


class SessionScript:
    def __init__(self, project: Path, backend: str, config: SessionConfig, steps: list[tuple[int, list[str]]]):
        self.project = project
        self.backend = backend
        self.config = config
        self.steps = steps


def parse_script(script_path: Path) -> SessionScript:
    script_path = Path(script_path)
    base = script_path.parent
    project: Optional[Path] = None
    backend = ""
    config = SessionConfig()
    steps: list[tuple[int, list[str]]] = []

    for line_no, raw in enumerate(script_path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            tokens = shlex.split(line)
        except ValueError as exc:
            raise ScriptParse(str(exc), line_no)
        head = tokens[0]
        if head == "project":
            if len(tokens) != 2:
                raise ScriptParse("project takes one path", line_no)
            project = (base / tokens[1]).resolve()
        elif head == "backend":
            if len(tokens) != 2:
                raise ScriptParse("backend takes one spec", line_no)
            backend = tokens[1]
            kind, _, rest = backend.partition(":")
            if kind not in ("scripted", "process") or not rest:
                raise ScriptParse(f"bad backend spec {backend!r}", line_no)
            if kind == "scripted":
                backend = f"scripted:{(base / rest).resolve()}"
        elif head == "config":
            if len(tokens) != 3 or tokens[1] not in _CONFIG_KEYS:
                raise ScriptParse(f"config takes <key> <value> with key in {sorted(_CONFIG_KEYS)}", line_no)
            attr, cast = _CONFIG_KEYS[tokens[1]]
            target = config.test if tokens[1].startswith("test.") else config
            setattr(target, attr, cast(tokens[2]))
        elif head in _FORBIDDEN_VERBS:
            raise ScriptParse(f"verb {head!r} is not allowed inside a script", line_no)
        else:
            steps.append((line_no, tokens))

    if project is None:
        raise ScriptParse("script never names a project", 1)
    if not backend:
        raise ScriptParse("script never names a backend", 1)
    if not project.is_dir():
        raise ScriptParse(f"project directory missing: {project}", 1)
    return SessionScript(project=project, backend=backend, config=config, steps=steps)


def run_scripted(script_path: Path, session_dir: Optional[Path] = None, seed: int = 0) -> tuple[str, int]:
    """Execute the whole scripted loop; returns (transcript, exit code)."""
    script = parse_script(script_path)
    base = Path(session_dir) if session_dir else Path(tempfile.mkdtemp(prefix="aporia-script-"))
    base.mkdir(parents=True, exist_ok=True)
    work_project = base / "project"
    if work_project.exists():
        shutil.rmtree(work_project)
    shutil.copytree(script.project, work_project)

    engine = Engine.create(
        base / "session",
        work_project,
        script.config,
        id_source=SeededIds(seed),
        clock=FixedClock(),
    )
    transcript_lines: list[str] = []
    parser = cli.build_parser()
    try:
        engine.attach_backend(cli.make_backend_factory(script.backend, engine))
        for index, (line_no, tokens) in enumerate(script.steps):
            transcript_lines.append("$ " + " ".join(tokens))
            out = io.StringIO()
            err = io.StringIO()
            try:
                ns = parser.parse_args(tokens)
            except SystemExit:
                raise ScriptParse(f"unparseable step {' '.join(tokens)!r}", line_no)
            try:
                code = cli.dispatch(ns, engine, cli.Io(out, err, ns.json))
            except DomainError as exc:
                transcript_lines.append(f"{exc.code}: {exc}")
                transcript_lines.append("exit 1")
                raise StepFailed(index, f"{exc.code}: {exc}") from exc
            if engine.orchestrator is not None:
                engine.orchestrator.wait_idle(60)
            body = out.getvalue()
            if body:
                transcript_lines.append(body.rstrip("\n"))
            if err.getvalue():
                transcript_lines.append(err.getvalue().rstrip("\n"))
            transcript_lines.append(f"exit {code}")
            if code != 0:
                raise StepFailed(index, err.getvalue().strip() or f"step exited {code}")
    finally:
        engine.close()
        transcript = "\n".join(transcript_lines) + ("\n" if transcript_lines else "")
        (base / "transcript.txt").write_text(transcript, encoding="utf-8")

    return transcript, 0

"""Headless front door.

Every verb maps to exactly one engine operation (or a composite like
``replay-script``). Exit codes: 0 success, 1 domain error (message on
stderr), 2 usage error. ``--json`` switches stdout to the canonical
serialization, which is also what snapshot digests are computed from.
"""

from __future__ import annotations

import argparse
import sys
import threading
from pathlib import Path
from typing import Optional, TextIO

from .backends import ProcessBackendFactory, ScriptedBackendFactory, load_fixture
from .engine import Engine
from .errors import DomainError
from .events import canonical_json
from .validation import decision_checklist

DEFAULT_SESSION = ".aporia"


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _global_options(parser: argparse.ArgumentParser, top: bool) -> None:
    # Registered on every level (with SUPPRESS below the top) so the flags
    # work both before and after the verb: `aporia --json bank show` and
    # `aporia bank show --json`.
    kwargs = {} if top else {"default": argparse.SUPPRESS}
    parser.add_argument("--session", help="session directory", **({"default": DEFAULT_SESSION} if top else kwargs))
    parser.add_argument("--json", action="store_true", help="machine-readable output", **kwargs)
    parser.add_argument("--backend", help="agent backend: scripted:<fixture> or process:<cmd>", **({"default": ""} if top else kwargs))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aporia", description="Decision-oriented programming engine")
    _global_options(parser, top=True)
    verbs = parser.add_subparsers(dest="verb", required=True)

    def leaf(sub, name: str, help: str = "") -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help or None)
        _global_options(p, top=False)
        return p

    p = leaf(verbs, "init", "create a session")
    p.add_argument("--project", required=True, help="target project root")
    p.add_argument("--display-cap", type=int, default=5)
    p.add_argument("--test-command", default="", help="validation command template ({suite} {path} {report})")
    p.add_argument("--report-format", default="junit", choices=["junit", "json"])

    goal_sub = verbs.add_parser("goal", help="manage the goal").add_subparsers(dest="action", required=True)
    leaf(goal_sub, "set").add_argument("text")

    bank_sub = verbs.add_parser("bank", help="the decision bank").add_subparsers(dest="action", required=True)
    leaf(bank_sub, "show")

    q_sub = verbs.add_parser("questions", help="pending design questions").add_subparsers(dest="action", required=True)
    leaf(q_sub, "list")
    leaf(q_sub, "show").add_argument("id")
    p = leaf(q_sub, "answer")
    p.add_argument("id")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--yes", action="store_true")
    group.add_argument("--no", action="store_true")
    p.add_argument("--comment", default="")
    leaf(q_sub, "dismiss").add_argument("id")

    d_sub = verbs.add_parser("decisions", help="the decision records").add_subparsers(dest="action", required=True)
    leaf(d_sub, "list")
    p = leaf(d_sub, "add")
    p.add_argument("title")
    p.add_argument("--comment", default="")
    p = leaf(d_sub, "edit")
    p.add_argument("id")
    p.add_argument("--answer", choices=["yes", "no"])
    p.add_argument("--comment")
    p.add_argument("--title")
    leaf(d_sub, "revoke").add_argument("id")

    plan_sub = verbs.add_parser("plan", help="the plan document").add_subparsers(dest="action", required=True)
    leaf(plan_sub, "show")

    leaf(verbs, "implement", "hand the plan to the implementer agent")
    leaf(verbs, "validate", "run decision-linked suites")

    r_sub = verbs.add_parser("report", help="validation reports").add_subparsers(dest="action", required=True)
    leaf(r_sub, "show")

    p = leaf(verbs, "serve", "start the HTTP API / web console")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--console-dir", default="", help="static bundle directory")

    p = leaf(verbs, "replay-script", "run a scripted session end to end")
    p.add_argument("script")
    p.add_argument("--transcript", default="", help="also write the transcript here")

    return parser


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


class Io:
    def __init__(self, out: TextIO, err: TextIO, json_mode: bool):
        self.out = out
        self.err = err
        self.json_mode = json_mode

    def emit(self, payload, text_lines) -> None:
        if self.json_mode:
            print(canonical_json(payload), file=self.out)
        else:
            for line in text_lines:
                print(line, file=self.out)

    def progress(self, line: str) -> None:
        if not self.json_mode:
            print(line, file=self.out)


def _short(uid: str) -> str:
    return uid.split("-")[0]


def _question_lines(q) -> list[str]:
    return [f"[{_short(q.id)}] {q.title}  ({q.status})"]


def _decision_lines(d) -> list[str]:
    mark = {"yes": "yes", "no": "no", "not-applicable": "custom"}[d.answer]
    suffix = f" — {d.comment}" if d.comment else ""
    return [f"[{_short(d.id)}] {d.title} [{mark}]{suffix}"]


def resolve_id(engine: Engine, token: str, kind: str) -> str:
    """Accept @qN/@dN positional placeholders, full ids, or unique prefixes."""
    state = engine.bank_state
    if token.startswith("@q") and token[2:].isdigit():
        order = state.question_order
        index = int(token[2:]) - 1
        if 0 <= index < len(order):
            return order[index]
        return token
    if token.startswith("@d") and token[2:].isdigit():
        order = state.decision_order
        index = int(token[2:]) - 1
        if 0 <= index < len(order):
            return order[index]
        return token
    pool = state.question_order if kind == "question" else state.decision_order
    if token in pool:
        return token
    matches = [uid for uid in pool if uid.startswith(token)]
    return matches[0] if len(matches) == 1 else token


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def dispatch(ns: argparse.Namespace, engine: Engine, io: Io) -> int:
    """Run one parsed verb against a live engine."""
    verb = ns.verb
    if verb == "goal" and ns.action == "set":
        goal = engine.set_goal(ns.text)
        _wait_agents(engine)
        io.emit(goal.to_dict(), [f"goal {_short(goal.id)}: {goal.text}"])
    elif verb == "bank" and ns.action == "show":
        view = engine.bank_view()
        lines = [f"goal: {view.goal.text if view.goal else '(not set)'}", f"pending ({len(view.pending)} shown, {view.backlog} queued):"]
        for q in view.pending:
            lines += ["  " + _question_lines(q)[0]]
        lines.append(f"decisions ({len(view.decisions)}):")
        for d in view.decisions:
            lines += ["  " + _decision_lines(d)[0]]
        if view.revoked:
            lines.append(f"revoked ({len(view.revoked)}):")
            for d in view.revoked:
                lines += ["  " + _decision_lines(d)[0]]
        io.emit(view.to_dict(), lines)
    elif verb == "questions":
        return _dispatch_questions(ns, engine, io)
    elif verb == "decisions":
        return _dispatch_decisions(ns, engine, io)
    elif verb == "plan" and ns.action == "show":
        text = engine.plan_text()
        io.emit({"plan": text}, [text.rstrip("\n")])
    elif verb == "implement":
        before = engine.head_seq
        item = engine.trigger_implementation()
        _stream_progress(engine, io, before)
        io.emit({"kind": item.kind, "work": item.payload}, ["implementation turn complete"])
    elif verb == "validate":
        report = engine.run_validation()
        io.emit(report.to_dict(), decision_checklist(report))
    elif verb == "report" and ns.action == "show":
        report = engine.latest_report()
        if report is None:
            print("no validation report yet", file=io.err)
            return 1
        payload = report.to_dict()
        payload["checklist"] = decision_checklist(report)
        summary = " ".join(f"{k}={v}" for k, v in sorted(report.summary.items()))
        io.emit(payload, decision_checklist(report) + [summary])
    else:  # pragma: no cover - parser prevents unknown verbs
        print(f"unhandled verb {verb}", file=io.err)
        return 2
    return 0


def _dispatch_questions(ns, engine: Engine, io: Io) -> int:
    if ns.action == "list":
        view = engine.bank_view()
        io.emit(
            {"pending": [q.to_dict() for q in view.pending], "backlog": view.backlog},
            [_question_lines(q)[0] for q in view.pending] + ([f"(+{view.backlog} queued)"] if view.backlog else []),
        )
        return 0
    qid = resolve_id(engine, ns.id, "question")
    if ns.action == "show":
        question = engine.question(qid)
        if question is None:
            from .errors import UnknownQuestion

            raise UnknownQuestion(ns.id)
        q = question
        lines = [q.title, f"  yes: {q.yes_rationale}", f"  no: {q.no_rationale}"]
        for ref in q.code_refs:
            lines.append(f"  see {ref.path}:{ref.line_start}-{ref.line_end}")
        io.emit(q.to_dict(), lines)
    elif ns.action == "answer":
        decision = engine.answer_question(qid, "yes" if ns.yes else "no", ns.comment)
        _wait_agents(engine)
        io.emit(decision.to_dict(), _decision_lines(decision))
    elif ns.action == "dismiss":
        question = engine.dismiss_question(qid)
        io.emit(question.to_dict(), [f"dismissed: {question.title}"])
    return 0


def _dispatch_decisions(ns, engine: Engine, io: Io) -> int:
    if ns.action == "list":
        view = engine.bank_view()
        io.emit(
            {"decisions": [d.to_dict() for d in view.decisions], "revoked": [d.to_dict() for d in view.revoked]},
            [_decision_lines(d)[0] for d in view.decisions]
            + [f"(revoked) {_decision_lines(d)[0]}" for d in view.revoked],
        )
        return 0
    if ns.action == "add":
        decision = engine.add_custom_decision(ns.title, ns.comment)
        _wait_agents(engine)
        io.emit(decision.to_dict(), _decision_lines(decision))
        return 0
    did = resolve_id(engine, ns.id, "decision")
    if ns.action == "edit":
        decision = engine.edit_decision(did, new_answer=ns.answer, new_comment=ns.comment, new_title=ns.title)
        _wait_agents(engine)
        io.emit(decision.to_dict(), _decision_lines(decision))
    elif ns.action == "revoke":
        decision = engine.revoke_decision(did)
        io.emit(decision.to_dict(), [f"revoked: {decision.title}"])
    return 0


def _wait_agents(engine: Engine, timeout: float = 60.0) -> None:
    if engine.orchestrator is not None:
        engine.orchestrator.wait_idle(timeout)


def _stream_progress(engine: Engine, io: Io, from_seq: int) -> None:
    """Poll the event stream while agents work, rendering progress lines."""
    if engine.orchestrator is None:
        return
    cursor = from_seq
    done = threading.Event()

    def waiter():
        engine.orchestrator.wait_idle(300)
        done.set()

    threading.Thread(target=waiter, daemon=True).start()
    while not done.is_set():
        for event in engine.wait_events(cursor, timeout=0.2):
            if event.kind.startswith("Agent"):
                role = event.payload.get("role", "")
                io.progress(f"  {event.kind} {role}")
            cursor = max(cursor, event.seq)
    for event in engine.events_from(cursor):
        if event.kind.startswith("Agent"):
            io.progress(f"  {event.kind} {event.payload.get('role', '')}")


def make_backend_factory(spec: str, engine: Engine):
    kind, _, rest = spec.partition(":")
    if kind == "scripted":
        return ScriptedBackendFactory(
            load_fixture(rest),
            transcript_path=engine.store.session_dir / "backend_transcript.jsonl",
            project_root=engine.project_root,
        )
    if kind == "process":
        return ProcessBackendFactory(rest)
    raise DomainError(f"unknown backend spec {spec!r}")


# ---------------------------------------------------------------------------
# Entry
# ---------------------------------------------------------------------------


def execute(argv: Optional[list[str]] = None, out: TextIO = None, err: TextIO = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    io = Io(out, err, ns.json)

    try:
        if ns.verb == "init":
            from .config import SessionConfig, TestConfig

            config = SessionConfig(
                display_cap=ns.display_cap,
                test=TestConfig(command_template=ns.test_command, report_format=ns.report_format),
            )
            engine = Engine.create(Path(ns.session), Path(ns.project), config)
            with engine:
                io.emit(
                    {"session_id": engine.store.session_id, "session_dir": str(engine.store.session_dir)},
                    [f"session {engine.store.session_id} at {engine.store.session_dir}"],
                )
            return 0
        if ns.verb == "replay-script":
            from .scripting import run_scripted

            transcript, code = run_scripted(Path(ns.script), session_dir=Path(ns.session) if ns.session != DEFAULT_SESSION else None)
            if ns.transcript:
                Path(ns.transcript).write_text(transcript, encoding="utf-8")
            print(transcript, end="", file=out)
            return code
        if ns.verb == "serve":
            return _run_serve(ns, io)

        engine = Engine.open(Path(ns.session))
        try:
            if ns.backend:
                engine.attach_backend(make_backend_factory(ns.backend, engine))
            return dispatch(ns, engine, io)
        finally:
            engine.close()
    except DomainError as exc:
        print(f"{exc.code}: {exc}", file=err)
        return 1
    except Exception as exc:  # surfaced as an exit code, never a traceback
        print(f"error: {exc}", file=err)
        return 1


def _run_serve(ns, io: Io) -> int:
    from .api import serve as api_serve

    engine = Engine.open(Path(ns.session))
    try:
        if ns.backend:
            engine.attach_backend(make_backend_factory(ns.backend, engine))
        static = Path(ns.console_dir) if ns.console_dir else _default_console_dir()
        server = api_serve(engine, host=ns.host, port=ns.port, static_dir=static)
        io.progress(f"serving on {server.address} (Ctrl-C to stop)")
        try:
            threading.Event().wait()
        except KeyboardInterrupt:
            io.progress("shutting down")
        finally:
            server.shutdown()
        return 0
    finally:
        engine.close()


def _default_console_dir() -> Optional[Path]:
    for candidate in (Path("frontend/dist"), Path(__file__).resolve().parents[2] / "frontend" / "dist"):
        if (candidate / "index.html").is_file():
            return candidate
    return None


def entrypoint() -> None:
    raise SystemExit(execute())


if __name__ == "__main__":
    entrypoint()

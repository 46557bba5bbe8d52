from __future__ import annotations

import io
import json
from pathlib import Path

import pytest

from aporia.cli import execute
from aporia.errors import ScriptParse
from aporia.scripting import parse_script, run_scripted

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = execute(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def session(tmp_path, project):
    session_dir = tmp_path / "cli-session"
    code, out, err = run_cli("--session", str(session_dir), "init", "--project", str(project))
    assert code == 0, err
    return session_dir


def test_init_goal_bank_show_json_flow(session):
    code, out, err = run_cli("--session", str(session), "goal", "set", "Add access control")
    assert code == 0, err
    code, out, err = run_cli("--session", str(session), "bank", "show", "--json")
    assert code == 0
    view = json.loads(out)
    assert view["goal"]["text"] == "Add access control"
    assert view["pending"] == [] and view["decisions"] == []


def test_answer_prints_decision_with_derived_title(session, tmp_path):
    run_cli("--session", str(session), "goal", "set", "Add access control")
    fixture = {
        "roles": {
            "questioner": {"turns": [{"updates": [{
                "kind": "tool_call",
                "tool": "submit_argument",
                "args": {
                    "question_title": "Should reviewer identities be hidden from authors?",
                    "yes_rationale": "blind review",
                    "no_rationale": "transparency",
                },
            }]}]},
            "planner": {},
            "implementer": {},
        }
    }
    fixture_path = tmp_path / "fixture.json"
    fixture_path.write_text(json.dumps(fixture), encoding="utf-8")
    code, out, err = run_cli(
        "--session", str(session), "--backend", f"scripted:{fixture_path}", "goal", "set", "Add access control"
    )
    assert code == 0, err

    code, out, err = run_cli("--session", str(session), "questions", "list", "--json")
    qid = json.loads(out)["pending"][0]["id"]

    code, out, err = run_cli(
        "--session", str(session), "questions", "answer", qid, "--yes", "--comment", "double-blind"
    )
    assert code == 0, err
    assert "Reviewer identities are hidden from authors" in out

    code, out, err = run_cli("--session", str(session), "questions", "show", qid, "--json")
    assert json.loads(out)["status"] == "answered"


def test_unknown_question_id_exits_1_with_code_on_stderr(session):
    run_cli("--session", str(session), "goal", "set", "g")
    code, out, err = run_cli("--session", str(session), "questions", "answer", "bogus-id", "--yes")
    assert code == 1
    assert "UnknownQuestion" in err


def test_usage_error_exits_2(session):
    code, out, err = run_cli("--session", str(session), "questions", "answer")  # missing id
    assert code == 2
    code, out, err = run_cli("--session", str(session), "nonsense-verb")
    assert code == 2


def test_decisions_add_edit_revoke_roundtrip(session):
    run_cli("--session", str(session), "goal", "set", "g")
    code, out, err = run_cli(
        "--session", str(session), "decisions", "add", "Admins can always see all the details of all papers", "--json"
    )
    assert code == 0
    decision = json.loads(out)
    assert decision["answer"] == "not-applicable"

    code, out, err = run_cli(
        "--session", str(session), "decisions", "edit", decision["id"], "--comment", "always", "--json"
    )
    assert json.loads(out)["comment"] == "always"

    code, out, err = run_cli("--session", str(session), "decisions", "revoke", decision["id"], "--json")
    assert json.loads(out)["status"] == "revoked"

    code, out, err = run_cli("--session", str(session), "decisions", "revoke", decision["id"])
    assert code == 1 and "RevokedDecision" in err


def test_plan_show_contains_anchors(session):
    run_cli("--session", str(session), "goal", "set", "g")
    code, out, err = run_cli("--session", str(session), "plan", "show")
    assert code == 0
    assert "<!-- aporia:implement -->" in out


def test_validate_without_command_template_fails_cleanly(session):
    run_cli("--session", str(session), "goal", "set", "g")
    run_cli("--session", str(session), "decisions", "add", "d")
    code, out, err = run_cli("--session", str(session), "validate")
    assert code == 1
    assert "TestCommandMissing" in err


def test_report_show_before_any_validation(session):
    code, out, err = run_cli("--session", str(session), "report", "show")
    assert code == 1
    assert "no validation report" in err


# ---------------------------------------------------------------------------
# replay-script
# ---------------------------------------------------------------------------


def test_demo_script_matches_golden_transcript(tmp_path):
    transcript, code = run_scripted(FIXTURES / "demo_task_a.script", session_dir=tmp_path / "demo")
    assert code == 0
    golden = (FIXTURES / "demo_task_a.golden.txt").read_text(encoding="utf-8")
    assert transcript == golden


def test_script_without_planner_mapping_shows_unmapped_checklist(tmp_path):
    fixture = {
        "roles": {
            "questioner": {"turns": [{"updates": [{
                "kind": "tool_call",
                "tool": "submit_argument",
                "args": {"question_title": "Should x be done?", "yes_rationale": "r", "no_rationale": ""},
            }]}]},
            "planner": {"turns": [{"updates": [{"kind": "text", "text": "thinking"}]}]},
            "implementer": {},
        }
    }
    (tmp_path / "fixture.json").write_text(json.dumps(fixture), encoding="utf-8")
    (tmp_path / "proj").mkdir()
    script = tmp_path / "no_mapping.script"
    script.write_text(
        "project proj\n"
        "backend scripted:fixture.json\n"
        'config test.command_template "true {suite} {path} {report}"\n'
        'goal set "minimal goal"\n'
        "questions answer @q1 --yes\n"
        "validate\n",
        encoding="utf-8",
    )
    transcript, code = run_scripted(script, session_dir=tmp_path / "run")
    assert code == 0
    assert "∅" in transcript


def test_malformed_script_reports_line_number(tmp_path):
    script = tmp_path / "bad.script"
    script.write_text("project p\nbackend scripted:f.json\ngoal set \"unterminated\n", encoding="utf-8")
    with pytest.raises(ScriptParse) as exc:
        parse_script(script)
    assert "line 3" in str(exc.value)


def test_script_rejects_nested_replay(tmp_path):
    script = tmp_path / "nested.script"
    script.write_text("project p\nbackend scripted:f.json\nreplay-script other.script\n", encoding="utf-8")
    with pytest.raises(ScriptParse):
        parse_script(script)


def test_cli_replay_script_verb(tmp_path):
    code, out, err = run_cli(
        "--session", str(tmp_path / "rs"), "replay-script", str(FIXTURES / "demo_task_a.script")
    )
    assert code == 0
    assert "✓ Reviewer identities are hidden from authors — TestDoubleBlind" in out


def test_cli_api_parity_same_script_same_digest(tmp_path, project):
    """Identical op sequences through CLI verbs and HTTP endpoints produce
    byte-identical event logs (compared by snapshot digest)."""
    import requests

    from aporia.api import serve
    from aporia.backends import ScriptedBackendFactory
    from aporia.cli import Io, build_parser, dispatch
    from aporia.config import SessionConfig
    from aporia.engine import Engine
    from aporia.ids import FixedClock, SeededIds

    fixture = {
        "roles": {
            "questioner": {"turns": [{"updates": [
                {"kind": "tool_call", "tool": "submit_argument",
                 "args": {"question_title": f"Should policy {i} be enforced?", "yes_rationale": "r", "no_rationale": "c"}}
                for i in range(3)
            ]}]},
            "planner": {},
            "implementer": {},
        }
    }

    def build(side):
        engine = Engine.create(
            tmp_path / side, project, SessionConfig(), id_source=SeededIds(123), clock=FixedClock()
        )
        engine.attach_backend(ScriptedBackendFactory(fixture, project_root=project))
        return engine

    parser = build_parser()
    cli_engine = build("cli")
    try:
        for argv in (
            ["goal", "set", "Add access control"],
            ["questions", "answer", "@q1", "--yes", "--comment", "double-blind"],
            ["questions", "dismiss", "@q2"],
            ["decisions", "add", "Admins see everything", "--comment", "always"],
            ["decisions", "edit", "@d1", "--comment", "triple-checked"],
            ["decisions", "revoke", "@d2"],
        ):
            assert dispatch(parser.parse_args(argv), cli_engine, Io(io.StringIO(), io.StringIO(), False)) == 0
            cli_engine.orchestrator.wait_idle(30)
        cli_digest = cli_engine.snapshot_digest()
        cli_events = [(e.kind, e.ts) for e in cli_engine.events]
    finally:
        cli_engine.close()

    api_engine = build("api")
    server = serve(api_engine, port=0)
    try:
        def post(path, body):
            response = requests.post(f"{server.address}{path}", json=body, timeout=5)
            assert response.status_code < 300, response.text
            api_engine.orchestrator.wait_idle(30)
            return response.json()

        post("/api/goal", {"text": "Add access control"})
        bank = requests.get(f"{server.address}/api/bank", timeout=5).json()
        q1, q2 = bank["pending"][0]["id"], bank["pending"][1]["id"]
        answered = post(f"/api/questions/{q1}/answer", {"answer": "yes", "comment": "double-blind"})
        post(f"/api/questions/{q2}/dismiss", {})
        custom = post("/api/decisions", {"title": "Admins see everything", "comment": "always"})
        response = requests.patch(
            f"{server.address}/api/decisions/{answered['id']}", json={"comment": "triple-checked"}, timeout=5
        )
        assert response.status_code == 200
        api_engine.orchestrator.wait_idle(30)
        response = requests.delete(f"{server.address}/api/decisions/{custom['id']}", json={}, timeout=5)
        assert response.status_code == 200
        api_engine.orchestrator.wait_idle(30)

        assert [(e.kind, e.ts) for e in api_engine.events] == cli_events
        assert api_engine.snapshot_digest() == cli_digest
    finally:
        server.shutdown()
        api_engine.close()

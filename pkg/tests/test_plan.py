from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from aporia.errors import CorruptAnchors, DanglingLink
from aporia.events import SessionEvent
from aporia.plan import (
    SuiteLink,
    SuiteMeta,
    build_plan,
    extract_suite_meta,
    fold_links,
    mark_orphans,
    parse_plan,
    render_plan,
    render_plan_file,
    summarize_case,
)

from test_bank import BankHarness, Driver, op_strategy


# ---------------------------------------------------------------------------
# summarize_case
# ---------------------------------------------------------------------------


def test_summary_matches_reviewer_example():
    line = summarize_case(
        {"actor": "reviewer_a", "setup": "assigned to papers 2 & 3", "action": "GET /papers/3"},
        200,
    )
    assert line == "reviewer_a (assigned to papers 2 & 3) + GET /papers/3 -> 200"


def test_summary_without_setup():
    assert summarize_case({"actor": "admin", "action": "GET /papers/1"}, 200) == "admin + GET /papers/1 -> 200"


def test_summary_truncates_to_exactly_120_chars():
    line = summarize_case({"actor": "user", "setup": "x" * 300, "action": "GET /"}, 200)
    assert len(line) == 120
    assert line.endswith("…")


def test_summary_rejects_empty_sides():
    with pytest.raises(ValueError):
        summarize_case({}, 200)
    with pytest.raises(ValueError):
        summarize_case({"actor": "admin", "action": "GET /"}, "")


# ---------------------------------------------------------------------------
# Suite metadata extraction
# ---------------------------------------------------------------------------

SUITE_SOURCE = '''\
import unittest

class TestReviewerAccess(unittest.TestCase):
    # reviewer_a (assigned to papers 2 & 3) + GET /papers/3 -> 200
    def test_assigned_reviewer_can_view(self):
        pass

    # reviewer_b (not assigned) + GET /papers/3 -> 403
    def test_unassigned_reviewer_blocked(self):
        pass

class TestOther(unittest.TestCase):
    def test_something_else(self):
        pass
'''

SUITE_REGEX = r"^class\s+(?P<name>\w+)"
CASE_REGEX = r"^\s+def\s+(?P<name>test_\w+)"


def test_extract_suite_meta_finds_cases_and_summaries():
    meta = extract_suite_meta(SUITE_SOURCE, "TestReviewerAccess", "tests/test_access.py", SUITE_REGEX, CASE_REGEX)
    assert meta is not None
    assert meta.cases == [
        ("reviewer_a (assigned to papers 2 & 3) + GET /papers/3 -> 200", "tests/test_access.py::test_assigned_reviewer_can_view"),
        ("reviewer_b (not assigned) + GET /papers/3 -> 403", "tests/test_access.py::test_unassigned_reviewer_blocked"),
    ]


def test_extract_suite_meta_missing_suite():
    assert extract_suite_meta(SUITE_SOURCE, "TestMissing", "p", SUITE_REGEX, CASE_REGEX) is None


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def make_bank_with_mapped_decision():
    harness = BankHarness()
    harness.bank.set_goal("Add access control")
    q = harness.bank.ingest_question("Should reviewer identities be hidden from authors?", yes_rationale="r")
    decision = harness.bank.answer_question(q.id, "yes")
    link = SuiteLink(link_id="l1", decision_id=decision.id, suite_name="TestReviewerAccess", suite_path="tests/test_access.py")
    suites = {
        ("TestReviewerAccess", "tests/test_access.py"): SuiteMeta(
            "TestReviewerAccess",
            "tests/test_access.py",
            cases=[("reviewer_a (assigned to papers 2 & 3) + GET /papers/3 -> 200", "tests/test_access.py::test_assigned")],
        )
    }
    return harness, decision, link, suites


def test_rendered_plan_contains_summary_verbatim_above_case_ref():
    harness, decision, link, suites = make_bank_with_mapped_decision()
    text = render_plan(harness.bank.bank_view(), [link], suites)
    lines = text.splitlines()
    i = lines.index("- reviewer_a (assigned to papers 2 & 3) + GET /papers/3 -> 200")
    assert lines[i + 1] == "  ref: tests/test_access.py::test_assigned"
    assert f"<!-- aporia:bubble id={decision.id} -->" in lines
    assert "<!-- aporia:implement -->" in lines


def test_empty_bank_renders_goal_header_and_trigger_only():
    harness = BankHarness()
    text = render_plan(harness.bank.bank_view(), [])
    lines = [l for l in text.splitlines() if l]
    assert lines == ["# Goal: (not set)", "<!-- aporia:implement -->"]


def test_dangling_link_raises():
    harness = BankHarness()
    harness.bank.set_goal("g")
    link = SuiteLink(link_id="l1", decision_id="ghost", suite_name="T", suite_path="p")
    with pytest.raises(DanglingLink):
        render_plan(harness.bank.bank_view(), [link])


def test_bubble_anchor_immediately_precedes_suite_block():
    harness, decision, link, suites = make_bank_with_mapped_decision()
    plan = parse_plan(render_plan(harness.bank.bank_view(), [link], suites))
    sections = {s.anchor_id: s for s in plan.sections}
    suite = sections[decision.id].suite_block()
    assert suite is not None and suite["suite_name"] == "TestReviewerAccess"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def test_parse_render_structural_fixed_point():
    harness, decision, link, suites = make_bank_with_mapped_decision()
    plan = build_plan(harness.bank.bank_view(), [link], suites)
    text = render_plan_file(plan)
    assert parse_plan(text).structure() == plan.structure()


def test_duplicate_anchor_is_corrupt():
    harness, decision, link, suites = make_bank_with_mapped_decision()
    text = render_plan(harness.bank.bank_view(), [link], suites)
    anchor = f"<!-- aporia:bubble id={decision.id} -->"
    with pytest.raises(CorruptAnchors):
        parse_plan(text + anchor + "\n")


def test_malformed_anchor_is_corrupt():
    with pytest.raises(CorruptAnchors):
        parse_plan("# Goal: g\n<!-- aporia:bubble id=notauuid -->\n")


def test_user_prose_survives_render_parse_render():
    harness, decision, link, suites = make_bank_with_mapped_decision()
    text = render_plan(harness.bank.bank_view(), [link], suites)
    lines = text.split("\n")
    lines.insert(3, "NOTE: remember to double check the PDF endpoint.")
    lines.insert(len(lines) - 1, "trailing thought")
    edited = "\n".join(lines)
    assert render_plan_file(parse_plan(edited)) == edited


@settings(max_examples=100, deadline=None)
@given(ops=op_strategy, data=st.data())
def test_round_trip_fixed_point_on_generated_states(ops, data):
    harness = Driver().run(ops)
    view = harness.bank.bank_view()
    text = render_plan(view, [])
    reparsed = render_plan_file(parse_plan(text))
    assert reparsed == text
    # Splice user prose between lines; must survive byte-for-byte.
    lines = text.split("\n")
    position = data.draw(st.integers(min_value=1, max_value=max(1, len(lines) - 1)))
    prose = data.draw(st.text(alphabet=st.characters(blacklist_characters="\n<", blacklist_categories=("Cs",)), max_size=60))
    lines.insert(position, prose)
    edited = "\n".join(lines)
    assert render_plan_file(parse_plan(edited)) == edited


# ---------------------------------------------------------------------------
# Links / orphans
# ---------------------------------------------------------------------------


def test_remap_keeps_single_live_link():
    events = [
        SessionEvent(1, "t", "SuiteLinked", {"link_id": "l1", "decision_id": "d1", "suite_name": "A", "suite_path": "p"}),
        SessionEvent(2, "t", "SuiteRemapped", {"link_id": "l2", "decision_id": "d1", "suite_name": "B", "suite_path": "p2", "replaces": "l1"}),
    ]
    links = fold_links(events)
    assert len(links) == 1
    assert links[0].suite_name == "B" and links[0].status == "live"


def test_revocation_orphans_link():
    events = [
        SessionEvent(1, "t", "SuiteLinked", {"link_id": "l1", "decision_id": "d1", "suite_name": "A", "suite_path": "p"}),
        SessionEvent(2, "t", "DecisionRevoked", {"decision_id": "d1"}),
    ]
    links = fold_links(events)
    assert links[0].status == "orphaned"


def test_mark_orphans_soundness_and_completeness():
    harness = BankHarness()
    harness.bank.set_goal("g")
    kept = harness.bank.add_custom_decision("Keep this")
    dropped = harness.bank.add_custom_decision("Drop this")
    links = [
        SuiteLink("l1", kept.id, "TestKeep", "tests/test_keep.py"),
        SuiteLink("l2", dropped.id, "TestDrop", "tests/test_drop.py"),
    ]
    harness.bank.revoke_decision(dropped.id)
    updated = mark_orphans(links, harness.bank.bank_view())
    assert {l.link_id: l.status for l in updated} == {"l1": "live", "l2": "orphaned"}


def test_mark_orphans_no_revocations_is_noop():
    harness = BankHarness()
    harness.bank.set_goal("g")
    d = harness.bank.add_custom_decision("Keep")
    links = [SuiteLink("l1", d.id, "T", "p")]
    assert [l.status for l in mark_orphans(links, harness.bank.bank_view())] == ["live"]


def test_revoked_decision_without_link_is_noop():
    harness = BankHarness()
    harness.bank.set_goal("g")
    d = harness.bank.add_custom_decision("Drop")
    harness.bank.revoke_decision(d.id)
    assert mark_orphans([], harness.bank.bank_view()) == []

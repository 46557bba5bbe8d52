"""The plan document and decision->suite traceability.

The plan is a markdown file interleaving the goal, bubble anchors, and
decision-grouped suite summaries. Machine lines use HTML-comment anchors:

    <!-- aporia:bubble id=<uuid> -->     pairs a section with a decision/question
    <!-- aporia:implement -->            the implement trigger line

Parsing is lossless: every line the parser does not claim as a marker is
kept verbatim, so render(parse(text)) == text byte-for-byte and user prose
survives regeneration.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .bank import BankView
from .errors import CorruptAnchors, DanglingLink
from .events import SessionEvent

ANCHOR_RE = re.compile(r"^<!-- aporia:bubble id=([0-9a-fA-F-]{36}) -->$")
ANCHOR_LOOKALIKE_RE = re.compile(r"^\s*<!--\s*aporia:bubble")
TRIGGER_LINE = "<!-- aporia:implement -->"
TRIGGER_LOOKALIKE_RE = re.compile(r"^\s*<!--\s*aporia:implement")
GOAL_RE = re.compile(r"^# Goal: (.*)$")

_DECISION_RE = re.compile(r"^## Decision: (.*)$")
_QUESTION_RE = re.compile(r"^### Question: (.*)$")
_ANSWER_RE = re.compile(r"^Answer: (yes|no|not-applicable)$")
_SUITE_RE = re.compile(r"^Suite: `([^`]+)` \(`([^`]+)`\)$")
_CASE_RE = re.compile(r"^- (.*)$")
_REF_RE = re.compile(r"^  ref: (.*)$")

ELLIPSIS = "…"
SUMMARY_BUDGET = 120


# ---------------------------------------------------------------------------
# Traceability links
# ---------------------------------------------------------------------------


@dataclass
class SuiteLink:
    link_id: str
    decision_id: str
    suite_name: str
    suite_path: str
    status: str = "live"  # live | orphaned

    def to_dict(self) -> dict:
        return {
            "link_id": self.link_id,
            "decision_id": self.decision_id,
            "suite_name": self.suite_name,
            "suite_path": self.suite_path,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SuiteLink":
        return cls(**data)


class LinksState:
    """Fold of SuiteLinked / SuiteRemapped / DecisionRevoked events."""

    def __init__(self):
        self.links: list[SuiteLink] = []
        self._by_decision: dict[str, SuiteLink] = {}

    def apply(self, event: SessionEvent) -> None:
        if event.kind in ("SuiteLinked", "SuiteRemapped"):
            p = event.payload
            prior = self._by_decision.pop(p["decision_id"], None)
            if prior is not None:
                self.links.remove(prior)
            link = SuiteLink(
                link_id=p["link_id"],
                decision_id=p["decision_id"],
                suite_name=p["suite_name"],
                suite_path=p["suite_path"],
            )
            self.links.append(link)
            self._by_decision[link.decision_id] = link
        elif event.kind == "DecisionRevoked":
            link = self._by_decision.get(event.payload["decision_id"])
            if link is not None:
                link.status = "orphaned"

    def live_link_for(self, decision_id: str) -> Optional[SuiteLink]:
        link = self._by_decision.get(decision_id)
        return link if link is not None and link.status == "live" else None

    def pair_owner(self, suite_name: str, suite_path: str) -> Optional[SuiteLink]:
        for link in self.links:
            if link.status == "live" and link.suite_name == suite_name and link.suite_path == suite_path:
                return link
        return None


def fold_links(events: list[SessionEvent]) -> list[SuiteLink]:
    state = LinksState()
    for event in events:
        state.apply(event)
    return state.links


def mark_orphans(links: list[SuiteLink], bank: BankView) -> list[SuiteLink]:
    """Flag every link whose decision is revoked; live otherwise."""
    revoked = {d.id for d in bank.revoked}
    for link in links:
        link.status = "orphaned" if link.decision_id in revoked else "live"
    return links


# ---------------------------------------------------------------------------
# Case summaries
# ---------------------------------------------------------------------------


def summarize_case(inputs: dict, expected) -> str:
    """One-line test case gist: "<actor> (<setup>) + <action> -> <expected>".

    Stays within a 120-char budget, truncating with an ellipsis.
    """
    actor = str(inputs.get("actor", "")).strip()
    action = str(inputs.get("action", "")).strip()
    setup = str(inputs.get("setup", "")).strip()
    if isinstance(expected, dict):
        outcome = str(expected.get("outcome", "")).strip()
    else:
        outcome = str(expected).strip()
    if not (actor or setup or action):
        raise ValueError("empty scenario")
    if not outcome:
        raise ValueError("empty outcome")
    head = f"{actor} ({setup})" if setup else actor
    line = f"{head} + {action} -> {outcome}"
    if len(line) > SUMMARY_BUDGET:
        line = line[: SUMMARY_BUDGET - len(ELLIPSIS)] + ELLIPSIS
    return line


# ---------------------------------------------------------------------------
# Suite metadata (read from real test files, regex-level only)
# ---------------------------------------------------------------------------


@dataclass
class SuiteMeta:
    suite_name: str
    suite_path: str
    cases: list[tuple[str, str]] = field(default_factory=list)  # (summary, body ref)


def extract_suite_meta(
    source: str,
    suite_name: str,
    suite_path: str,
    suite_regex: str,
    case_regex: str,
) -> Optional[SuiteMeta]:
    """Locate a named suite in test-file source and collect its cases.

    Regex-level on purpose; no target-language parsing. A case's summary is
    the nearest comment line directly above its definition.
    """
    suite_re = re.compile(suite_regex)
    case_re = re.compile(case_regex)
    lines = source.splitlines()
    start = None
    for i, line in enumerate(lines):
        m = suite_re.match(line)
        if m and m.group("name") == suite_name:
            start = i
            break
    if start is None:
        return None
    meta = SuiteMeta(suite_name=suite_name, suite_path=suite_path)
    for i in range(start + 1, len(lines)):
        line = lines[i]
        if suite_re.match(line):
            break
        m = case_re.match(line)
        if not m:
            continue
        case_name = m.group("name")
        summary = ""
        j = i - 1
        while j > start:
            stripped = lines[j].strip()
            if stripped.startswith("#"):
                summary = stripped.lstrip("#").strip()
                break
            if stripped:
                break
            j -= 1
        meta.cases.append((summary, f"{suite_path}::{case_name}"))
    return meta


# ---------------------------------------------------------------------------
# Plan file model
# ---------------------------------------------------------------------------


@dataclass
class PlanSection:
    anchor_id: str
    lines: list[str]  # verbatim body, not including the anchor line

    @property
    def kind(self) -> str:
        for line in self.lines:
            if _DECISION_RE.match(line):
                return "decision"
            if _QUESTION_RE.match(line):
                return "question"
        return "free"

    @property
    def title(self) -> str:
        for line in self.lines:
            m = _DECISION_RE.match(line) or _QUESTION_RE.match(line)
            if m:
                return m.group(1)
        return ""

    def suite_block(self) -> Optional[dict]:
        suite = None
        for line in self.lines:
            m = _SUITE_RE.match(line)
            if m:
                suite = {"suite_name": m.group(1), "suite_path": m.group(2), "cases": []}
                continue
            if suite is None:
                continue
            m = _CASE_RE.match(line)
            if m:
                suite["cases"].append({"summary": m.group(1), "ref": ""})
                continue
            m = _REF_RE.match(line)
            if m and suite["cases"]:
                suite["cases"][-1]["ref"] = m.group(1)
        return suite


@dataclass
class PlanFile:
    goal_header: Optional[str]
    sections: list[PlanSection]
    preamble: list[str] = field(default_factory=list)  # verbatim lines before the first anchor
    has_trigger: bool = True
    trailing_newline: bool = True

    def structure(self) -> dict:
        """Comparable structural projection (ignores free interstitial text)."""
        return {
            "goal": self.goal_header or "",
            "trigger": self.has_trigger,
            "sections": [
                {
                    "anchor": s.anchor_id,
                    "kind": s.kind,
                    "title": s.title,
                    "suite": s.suite_block(),
                }
                for s in self.sections
            ],
        }


def render_plan_file(plan: PlanFile) -> str:
    out: list[str] = []
    if plan.goal_header is not None:
        out.append(f"# Goal: {plan.goal_header}")
    out.extend(plan.preamble)
    for section in plan.sections:
        out.append(f"<!-- aporia:bubble id={section.anchor_id} -->")
        out.extend(section.lines)
    text = "\n".join(out)
    return text + "\n" if plan.trailing_newline else text


def parse_plan(text: str) -> PlanFile:
    """Recover the plan's structure; everything unrecognized stays verbatim.

    Raises :class:`CorruptAnchors` on duplicated or malformed markers.
    """
    trailing_newline = text.endswith("\n")
    lines = text.split("\n")
    if trailing_newline:
        lines = lines[:-1]

    goal_header: Optional[str] = None
    if lines:
        m = GOAL_RE.match(lines[0])
        if m:
            goal_header = m.group(1)
            lines = lines[1:]

    preamble: list[str] = []
    sections: list[PlanSection] = []
    seen_ids: set[str] = set()
    trigger_count = 0
    current: Optional[PlanSection] = None

    for line in lines:
        anchor = ANCHOR_RE.match(line)
        if anchor:
            anchor_id = anchor.group(1)
            if anchor_id.lower() in seen_ids:
                raise CorruptAnchors(f"duplicated bubble anchor {anchor_id}")
            seen_ids.add(anchor_id.lower())
            current = PlanSection(anchor_id=anchor_id, lines=[])
            sections.append(current)
            continue
        if ANCHOR_LOOKALIKE_RE.match(line):
            raise CorruptAnchors(f"malformed bubble anchor: {line!r}")
        if line == TRIGGER_LINE:
            trigger_count += 1
            if trigger_count > 1:
                raise CorruptAnchors("duplicated implement trigger")
        elif TRIGGER_LOOKALIKE_RE.match(line):
            raise CorruptAnchors(f"malformed implement trigger: {line!r}")
        if current is None:
            preamble.append(line)
        else:
            current.lines.append(line)

    return PlanFile(
        goal_header=goal_header,
        sections=sections,
        preamble=preamble,
        has_trigger=trigger_count > 0,
        trailing_newline=trailing_newline,
    )


# ---------------------------------------------------------------------------
# Rendering from folded state
# ---------------------------------------------------------------------------


def _oneline(text: str) -> str:
    return " ".join(text.split())


def build_plan(
    bank: BankView,
    links: list[SuiteLink],
    suites: dict[tuple[str, str], SuiteMeta],
) -> PlanFile:
    """Deterministic plan from folded state: decisions in creation order,
    each bubble anchor immediately followed by its suite block, then the
    pending question bubbles."""
    known = {d.id for d in bank.decisions} | {d.id for d in bank.revoked}
    live_by_decision: dict[str, SuiteLink] = {}
    for link in links:
        if link.status != "live":
            continue
        if link.decision_id not in known:
            raise DanglingLink(f"link {link.link_id} names unknown decision {link.decision_id}")
        live_by_decision[link.decision_id] = link

    goal_text = _oneline(bank.goal.text) if bank.goal else "(not set)"
    preamble = ["", TRIGGER_LINE, ""]
    sections: list[PlanSection] = []

    for decision in bank.decisions:
        body: list[str] = [f"## Decision: {_oneline(decision.title)}"]
        if decision.origin == "elicited":
            body.append(f"Answer: {decision.answer}")
        else:
            body.append("Answer: not-applicable")
        if decision.comment:
            body.append(f"Comment: {_oneline(decision.comment)}")
        link = live_by_decision.get(decision.id)
        if link is not None:
            body.append(f"Suite: `{link.suite_name}` (`{link.suite_path}`)")
            meta = suites.get((link.suite_name, link.suite_path))
            for summary, ref in (meta.cases if meta else []):
                body.append(f"- {_oneline(summary)}")
                if ref:
                    body.append(f"  ref: {ref}")
        body.append("")
        sections.append(PlanSection(anchor_id=decision.id, lines=body))

    if bank.pending:
        if sections:
            sections[-1].lines.append("## Pending questions")
            sections[-1].lines.append("")
        else:
            preamble.extend(["## Pending questions", ""])
        for question in bank.pending:
            body = [f"### Question: {_oneline(question.title)}", ""]
            sections.append(PlanSection(anchor_id=question.id, lines=body))

    return PlanFile(goal_header=goal_text, sections=sections, preamble=preamble)


def render_plan(
    bank: BankView,
    links: list[SuiteLink],
    suites: Optional[dict[tuple[str, str], SuiteMeta]] = None,
) -> str:
    return render_plan_file(build_plan(bank, links, suites or {}))

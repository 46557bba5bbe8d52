"""Execution of decision-linked test suites.

Every live suite link runs exactly once through a configurable command
template; orphaned links are reported but never executed, and decisions
without a link show up as unmapped. The per-decision report is the
"traceable to code" check the checklist renders from.
"""

from __future__ import annotations

import logging
import re
import subprocess
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .config import SessionConfig
from .errors import ProjectRootMissing, TestCommandMissing
from .plan import SuiteLink, extract_suite_meta

logger = logging.getLogger(__name__)

GLYPH_PASSED = "✓"
GLYPH_FAILED = "✗"
GLYPH_UNMAPPED = "∅"
GLYPH_ORPHANED = "⊘"


@dataclass
class CaseResult:
    case_id: str
    passed: bool
    message: str = ""

    def to_dict(self) -> dict:
        return {"case_id": self.case_id, "passed": self.passed, "message": self.message}


@dataclass
class SuiteResult:
    suite_name: str
    suite_path: str
    outcome: str  # passed | failed | errored | not_found
    case_results: list[CaseResult] = field(default_factory=list)
    duration: float = 0.0
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "suite_name": self.suite_name,
            "suite_path": self.suite_path,
            "outcome": self.outcome,
            "case_results": [c.to_dict() for c in self.case_results],
            "duration": self.duration,
            "detail": self.detail,
        }


@dataclass
class ValidationReport:
    generated_at: str
    per_decision: dict  # decision_id -> entry dict
    summary: dict
    order: list[str] = field(default_factory=list)  # decision creation order

    def to_dict(self) -> dict:
        return {
            "generated_at": self.generated_at,
            "per_decision": self.per_decision,
            "summary": self.summary,
            "order": self.order,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationReport":
        return cls(
            generated_at=data["generated_at"],
            per_decision=data["per_decision"],
            summary=data["summary"],
            order=data.get("order", list(data["per_decision"])),
        )

    def entries(self) -> list[tuple[str, dict]]:
        return [(did, self.per_decision[did]) for did in (self.order or list(self.per_decision))]


@dataclass
class RunnerOutput:
    stdout: str = ""
    stderr: str = ""
    exit_code: int = 0
    report_text: str = ""


# ---------------------------------------------------------------------------
# Report parsing (total functions; never raise)
# ---------------------------------------------------------------------------


def _parse_junit(raw: RunnerOutput) -> list[SuiteResult]:
    try:
        root = ET.fromstring(raw.report_text)
    except ET.ParseError:
        return []
    suites: dict[str, SuiteResult] = {}
    for case in root.iter("testcase"):
        classname = case.get("classname", "")
        suite_name = classname.rsplit(".", 1)[-1] if classname else ""
        result = suites.setdefault(suite_name, SuiteResult(suite_name=suite_name, suite_path="", outcome="passed"))
        failure = case.find("failure")
        error = case.find("error")
        bad = failure if failure is not None else error
        message = (bad.get("message", "") or (bad.text or "").strip()) if bad is not None else ""
        result.case_results.append(CaseResult(case_id=case.get("name", ""), passed=bad is None, message=message))
        try:
            result.duration += float(case.get("time", "0") or 0)
        except ValueError:
            pass
    for result in suites.values():
        if any(not c.passed for c in result.case_results):
            result.outcome = "failed"
    return list(suites.values())


def _parse_json(raw: RunnerOutput) -> list[SuiteResult]:
    import json

    try:
        doc = json.loads(raw.report_text)
    except ValueError:
        return []
    results = []
    for suite in doc.get("suites", []):
        cases = [
            CaseResult(case_id=c.get("id", ""), passed=c.get("outcome") == "passed", message=c.get("message", ""))
            for c in suite.get("cases", [])
        ]
        outcome = "passed" if cases and all(c.passed for c in cases) else "failed"
        results.append(
            SuiteResult(
                suite_name=suite.get("name", ""),
                suite_path=suite.get("path", ""),
                outcome=outcome,
                case_results=cases,
                duration=float(suite.get("duration", 0.0)),
            )
        )
    return results


REPORT_PARSERS: dict[str, Callable[[RunnerOutput], list[SuiteResult]]] = {
    "junit": _parse_junit,
    "json": _parse_json,
}


def parse_runner_output(raw: RunnerOutput, requested: list[tuple[str, str]], report_format: str = "junit") -> list[SuiteResult]:
    """One SuiteResult per requested (name, path); unparseable -> errored."""
    parser = REPORT_PARSERS.get(report_format)
    parsed = parser(raw) if parser else []
    by_name = {s.suite_name: s for s in parsed}
    for extra in parsed:
        if extra.suite_name not in {name for name, _ in requested}:
            logger.info("runner output mentions unrequested suite %s; ignored", extra.suite_name)
    results = []
    for name, path in requested:
        found = by_name.get(name)
        if found is None:
            results.append(
                SuiteResult(
                    suite_name=name,
                    suite_path=path,
                    outcome="errored",
                    detail=_raw_digest(raw),
                )
            )
        else:
            found.suite_path = path
            results.append(found)
    return results


def _raw_digest(raw: RunnerOutput) -> str:
    parts = [f"exit={raw.exit_code}"]
    if raw.stdout.strip():
        parts.append(f"stdout: {raw.stdout.strip()[:2000]}")
    if raw.stderr.strip():
        parts.append(f"stderr: {raw.stderr.strip()[:2000]}")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


class ValidationRunner:
    def __init__(self, project_root: Path, config: SessionConfig, now: Callable[[], str]):
        self.project_root = Path(project_root)
        self.config = config
        self._now = now
        # Test seam: replaces the subprocess invocation.
        self.execute: Callable[[list[str], float], RunnerOutput] = self._execute

    def run(self, decisions: list, links: list[SuiteLink]) -> ValidationReport:
        """Validate all decisions ever recorded (active and revoked)."""
        if not self.config.test.command_template.strip():
            raise TestCommandMissing("test.command_template is not configured")
        if not self.project_root.is_dir():
            raise ProjectRootMissing(str(self.project_root))

        link_by_decision = {}
        for link in links:
            link_by_decision[link.decision_id] = link

        per_decision: dict[str, dict] = {}
        counts = {"passed": 0, "failed": 0, "errored": 0, "not_found": 0, "unmapped": 0, "orphaned": 0}
        for decision in decisions:
            link = link_by_decision.get(decision.id)
            if link is None:
                entry = {"status": "unmapped", "title": decision.title, "suite": None}
                counts["unmapped"] += 1
            elif link.status == "orphaned":
                entry = {"status": "orphaned", "title": decision.title,
                         "suite": {"suite_name": link.suite_name, "suite_path": link.suite_path}}
                counts["orphaned"] += 1
            else:
                result = self._run_suite(link)
                entry = {"status": result.outcome, "title": decision.title, "suite": result.to_dict()}
                counts[result.outcome] += 1
            per_decision[decision.id] = entry

        return ValidationReport(
            generated_at=self._now(),
            per_decision=per_decision,
            summary=counts,
            order=[d.id for d in decisions],
        )

    def _run_suite(self, link: SuiteLink) -> SuiteResult:
        suite_file = self.project_root / link.suite_path
        if not suite_file.is_file():
            return SuiteResult(link.suite_name, link.suite_path, "not_found", detail="suite file missing")
        meta = extract_suite_meta(
            suite_file.read_text(encoding="utf-8", errors="replace"),
            link.suite_name,
            link.suite_path,
            self.config.suite_regex,
            self.config.case_regex,
        )
        if meta is None:
            return SuiteResult(link.suite_name, link.suite_path, "not_found", detail="suite not present in file")

        with tempfile.TemporaryDirectory(prefix="aporia-report-") as tmp:
            report_path = Path(tmp) / "report.xml"
            argv = self._build_argv(link, report_path)
            raw = self.execute(argv, self.config.test.timeout_secs)
            if raw.report_text == "" and report_path.is_file():
                raw.report_text = report_path.read_text(encoding="utf-8", errors="replace")
        if raw.exit_code == -1 and raw.stderr == "timeout":
            return SuiteResult(link.suite_name, link.suite_path, "errored", detail="timeout")
        results = parse_runner_output(raw, [(link.suite_name, link.suite_path)], self.config.test.report_format)
        return results[0]

    def _build_argv(self, link: SuiteLink, report_path: Path) -> list[str]:
        import shlex

        rendered = (
            self.config.test.command_template
            .replace("{suite}", link.suite_name)
            .replace("{path}", link.suite_path)
            .replace("{report}", str(report_path))
        )
        return shlex.split(rendered)

    def _execute(self, argv: list[str], timeout: float) -> RunnerOutput:
        try:
            proc = subprocess.run(
                argv,
                cwd=self.project_root,
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired:
            return RunnerOutput(exit_code=-1, stderr="timeout")
        except OSError as exc:
            return RunnerOutput(exit_code=-1, stderr=str(exc))
        return RunnerOutput(stdout=proc.stdout, stderr=proc.stderr, exit_code=proc.returncode)


# ---------------------------------------------------------------------------
# Checklist
# ---------------------------------------------------------------------------


def decision_checklist(report: ValidationReport) -> list[str]:
    """One human-readable line per decision, in creation order."""
    lines = []
    for _, entry in report.entries():
        title = entry["title"]
        status = entry["status"]
        if status == "unmapped":
            lines.append(f"{GLYPH_UNMAPPED} {title} — no suite")
            continue
        suite_name = (entry.get("suite") or {}).get("suite_name", "?")
        if status == "orphaned":
            lines.append(f"{GLYPH_ORPHANED} {title} — {suite_name} (orphaned)")
        elif status == "passed":
            lines.append(f"{GLYPH_PASSED} {title} — {suite_name}")
        elif status == "failed":
            lines.append(f"{GLYPH_FAILED} {title} — {suite_name}")
        else:
            lines.append(f"{GLYPH_FAILED} {title} — {suite_name} ({status})")
    return lines

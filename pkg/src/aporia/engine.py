"""Session engine: the facade the CLI, the HTTP API, and tests drive.

Owns the single-writer append path. Every mutation — user action, agent
tool call, turn lifecycle — funnels through one re-entrant lock: validate,
append event(s), fold them into live state, rewrite the plan/links sidecars,
then notify the affected agent. Reads are snapshot-consistent views.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path
from typing import Callable, Optional

from .bank import BankState, BankView, Decision, DecisionBank, Goal, Question
from .config import SessionConfig
from .errors import Busy, NoDecisions, ProjectRootMissing, SessionDown
from .events import SessionEvent, snapshot_digest
from .gateway import ToolGateway
from .ids import Clock, IdSource
from .orchestrator import (
    FORMALIZE_DECISIONS,
    GENERATE_QUESTIONS,
    IMPLEMENT,
    Orchestrator,
    WorkItem,
)
from .plan import LinksState, SuiteLink, SuiteMeta, extract_suite_meta, render_plan
from .store import SessionStore, write_sidecar
from .validation import ValidationReport, ValidationRunner

logger = logging.getLogger(__name__)


class Engine:
    def __init__(
        self,
        store: SessionStore,
        config: SessionConfig,
        id_source: Optional[IdSource] = None,
        clock: Optional[Clock] = None,
    ):
        self.store = store
        self.config = config
        self.ids = id_source or IdSource()
        self.clock = clock or Clock()
        self.lock = threading.RLock()
        self._event_arrived = threading.Condition(self.lock)
        self.events: list[SessionEvent] = []
        self.bank_state = BankState(display_cap=config.display_cap)
        self.links_state = LinksState()
        self.bank = DecisionBank(self.bank_state, self._emit, self.ids.new_id, self.clock.now)
        self.project_root = store.project_root
        self.gateway = ToolGateway(self, project_root=self.project_root)
        self.orchestrator: Optional[Orchestrator] = None
        self._validation_slot = threading.Lock()
        self._listeners: list[Callable[[SessionEvent], None]] = []

        for event in store.load_events():
            self.events.append(event)
            self.bank_state.apply(event)
            self.links_state.apply(event)

    # -- construction ----------------------------------------------------------

    @classmethod
    def create(
        cls,
        session_dir: Path,
        project_root: Path,
        config: Optional[SessionConfig] = None,
        id_source: Optional[IdSource] = None,
        clock: Optional[Clock] = None,
    ) -> "Engine":
        project_root = Path(project_root)
        if not project_root.is_dir():
            raise ProjectRootMissing(str(project_root))
        config = config or SessionConfig()
        ids = id_source or IdSource()
        clk = clock or Clock()
        store = SessionStore.create(Path(session_dir), ids.new_id(), project_root, config, clock=clk)
        engine = cls(store, config, id_source=ids, clock=clk)
        engine._write_sidecars()
        return engine

    @classmethod
    def open(
        cls,
        session_dir: Path,
        id_source: Optional[IdSource] = None,
        clock: Optional[Clock] = None,
    ) -> "Engine":
        clk = clock or Clock()
        store = SessionStore.open(Path(session_dir), clock=clk)
        return cls(store, store.load_config(), id_source=id_source, clock=clk)

    def close(self) -> None:
        if self.orchestrator is not None:
            self.orchestrator.stop()
            self.orchestrator = None
        self.store.close()

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- append path --------------------------------------------------------------

    def _emit(self, kind: str, payload: dict) -> SessionEvent:
        with self.lock:
            event = self.store.append(kind, payload)
            self.events.append(event)
            self.bank_state.apply(event)
            self.links_state.apply(event)
            for listener in self._listeners:
                try:
                    listener(event)
                except Exception:
                    logger.exception("event listener failed")
            self._event_arrived.notify_all()
            return event

    def append_event(self, kind: str, payload: dict) -> SessionEvent:
        """Lifecycle events from the orchestrator/validation runner."""
        return self._emit(kind, payload)

    def subscribe(self, listener: Callable[[SessionEvent], None]) -> None:
        with self.lock:
            self._listeners.append(listener)

    @property
    def head_seq(self) -> int:
        with self.lock:
            return len(self.events)

    def events_from(self, after_seq: int) -> list[SessionEvent]:
        with self.lock:
            return self.events[after_seq:]

    def wait_events(self, after_seq: int, timeout: float) -> list[SessionEvent]:
        """Events with seq > after_seq, blocking up to timeout for new ones."""
        with self._event_arrived:
            self._event_arrived.wait_for(lambda: len(self.events) > after_seq, timeout)
            return self.events[after_seq:]

    def snapshot_digest(self) -> str:
        with self.lock:
            return snapshot_digest(self.events)

    # -- bank operations ------------------------------------------------------------

    def set_goal(self, text: str) -> Goal:
        with self.lock:
            goal = self.bank.set_goal(text)
            self._write_sidecars()
        self._notify_questioner()
        return goal

    def ingest_question(self, title, yes_rationale="", no_rationale="", code_refs=None) -> Question:
        with self.lock:
            question = self.bank.ingest_question(title, yes_rationale, no_rationale, code_refs)
            self._write_sidecars()
            return question

    def answer_question(self, question_id: str, answer: str, comment: str = "") -> Decision:
        with self.lock:
            decision = self.bank.answer_question(question_id, answer, comment)
            self._write_sidecars()
        self._notify_planner({"kind": "recorded", "decision": decision.to_dict()})
        return decision

    def dismiss_question(self, question_id: str) -> Question:
        with self.lock:
            question = self.bank.dismiss_question(question_id)
            self._write_sidecars()
            return question

    def add_custom_decision(self, title: str, comment: str = "") -> Decision:
        with self.lock:
            decision = self.bank.add_custom_decision(title, comment)
            self._write_sidecars()
        self._notify_planner({"kind": "recorded", "decision": decision.to_dict()})
        return decision

    def edit_decision(self, decision_id, new_answer=None, new_comment=None, new_title=None) -> Decision:
        with self.lock:
            before = self.bank_state.decisions.get(decision_id)
            prior = (before.title, before.answer, before.comment) if before else None
            decision = self.bank.edit_decision(decision_id, new_answer, new_comment, new_title)
            changed = [
                name
                for name, was, now in zip(
                    ("title", "answer", "comment"), prior, (decision.title, decision.answer, decision.comment)
                )
                if was != now
            ]
            self._write_sidecars()
        self._notify_planner({"kind": "revised", "decision": decision.to_dict(), "changed": changed})
        return decision

    def revoke_decision(self, decision_id: str) -> Decision:
        with self.lock:
            decision = self.bank.revoke_decision(decision_id)
            self._write_sidecars()
            return decision

    def bank_view(self) -> BankView:
        with self.lock:
            return self.bank_state.view()

    def question(self, question_id: str) -> Optional[Question]:
        with self.lock:
            return self.bank_state.questions.get(question_id)

    def all_decisions(self) -> list[Decision]:
        with self.lock:
            return [self.bank_state.decisions[d] for d in self.bank_state.decision_order]

    # -- gateway host surface ----------------------------------------------------------

    def decision_status(self, decision_id: str) -> Optional[str]:
        with self.lock:
            decision = self.bank_state.decisions.get(decision_id)
            return decision.status if decision else None

    def record_suite_link(self, decision_id: str, suite_name: str, suite_path: str) -> SuiteLink:
        from .errors import SchemaViolation

        with self.lock:
            owner = self.links_state.pair_owner(suite_name, suite_path)
            if owner is not None and owner.decision_id != decision_id:
                raise SchemaViolation(
                    f"suite {suite_name} at {suite_path} already validates decision {owner.decision_id}"
                )
            prior = self.links_state.live_link_for(decision_id)
            payload = {
                "link_id": self.ids.new_id(),
                "decision_id": decision_id,
                "suite_name": suite_name,
                "suite_path": suite_path,
            }
            if prior is not None:
                payload["replaces"] = prior.link_id
                self._emit("SuiteRemapped", payload)
            else:
                self._emit("SuiteLinked", payload)
            self._write_sidecars()
            return self.links_state.live_link_for(decision_id)

    def links(self) -> list[SuiteLink]:
        with self.lock:
            return [SuiteLink.from_dict(link.to_dict()) for link in self.links_state.links]

    # -- plan -----------------------------------------------------------------------

    def suite_metadata(self) -> dict[tuple[str, str], SuiteMeta]:
        metas = {}
        for link in self.links_state.links:
            if link.status != "live":
                continue
            suite_file = self.project_root / link.suite_path
            if not suite_file.is_file():
                continue
            meta = extract_suite_meta(
                suite_file.read_text(encoding="utf-8", errors="replace"),
                link.suite_name,
                link.suite_path,
                self.config.suite_regex,
                self.config.case_regex,
            )
            if meta is not None:
                metas[(link.suite_name, link.suite_path)] = meta
        return metas

    def plan_text(self) -> str:
        with self.lock:
            return render_plan(self.bank_state.view(), self.links_state.links, self.suite_metadata())

    def _write_sidecars(self) -> None:
        (self.store.session_dir / "plan.md").write_text(self.plan_text(), encoding="utf-8")
        write_sidecar(self.store.session_dir / "links.json", [l.to_dict() for l in self.links_state.links])

    # -- agents --------------------------------------------------------------------------

    def attach_backend(self, factory) -> Orchestrator:
        orchestrator = Orchestrator(
            factory,
            self.config,
            self.lock,
            append_event=self.append_event,
            call_tool=self.gateway.call,
            project_root=self.project_root,
        )
        orchestrator.start_session()
        self.orchestrator = orchestrator
        return orchestrator

    def _notify_questioner(self) -> None:
        if self.orchestrator is None:
            return
        with self.lock:
            view = self.bank_state.view()
            payload = {"goal": view.goal.to_dict() if view.goal else None, "bank": view.to_dict()}
        try:
            self.orchestrator.submit_work(
                "questioner", WorkItem(GENERATE_QUESTIONS, payload, created_at=self.clock.now())
            )
        except SessionDown as exc:
            logger.warning("questioner not notified: %s", exc)

    def _notify_planner(self, delta: dict) -> None:
        if self.orchestrator is None:
            return
        item = WorkItem(
            FORMALIZE_DECISIONS,
            {"deltas": [delta]},
            created_at=self.clock.now(),
            batch_members=[delta],
        )
        try:
            self.orchestrator.submit_work("planner", item)
        except SessionDown as exc:
            logger.warning("planner not notified: %s", exc)

    def trigger_implementation(self) -> WorkItem:
        """Build the implement work item from the goal, the active decisions,
        and the mapped suite paths, and hand it to the implementer."""
        with self.lock:
            view = self.bank_state.view()
            if not view.decisions:
                raise NoDecisions("no active decisions to implement")
            if self.orchestrator is None:
                raise SessionDown("no implementer session attached")
            implementer = self.orchestrator.sessions.get("implementer")
            if implementer is None or implementer.state == "down":
                raise SessionDown("no live implementer session")
            suite_paths = []
            for link in self.links_state.links:
                if link.status == "live" and link.suite_path not in suite_paths:
                    suite_paths.append(link.suite_path)
            payload = {
                "goal": view.goal.to_dict() if view.goal else None,
                "decisions": [d.to_dict() for d in view.decisions],
                "suites": suite_paths,
            }
            item = WorkItem(IMPLEMENT, payload, created_at=self.clock.now())
            self._emit("ImplementTriggered", {"work": payload})
            self.orchestrator.submit_work("implementer", item)
        return item

    # -- validation ------------------------------------------------------------------------

    def run_validation(self) -> ValidationReport:
        """Execute every live suite link once; one run at a time."""
        if not self._validation_slot.acquire(blocking=False):
            raise Busy("a validation run is already in progress")
        try:
            with self.lock:
                decisions = self.all_decisions()
                links = self.links()
            runner = ValidationRunner(self.project_root, self.config, self.clock.now)
            report = runner.run(decisions, links)
            with self.lock:
                stamp = report.generated_at.replace(":", "").replace(".", "-")
                report_rel = f"reports/{stamp}.json"
                write_sidecar(self.store.session_dir / report_rel, report.to_dict())
                self._emit("ValidationCompleted", {"report_path": report_rel, "summary": report.summary})
            return report
        finally:
            self._validation_slot.release()

    def latest_report(self) -> Optional[ValidationReport]:
        import json

        with self.lock:
            for event in reversed(self.events):
                if event.kind == "ValidationCompleted":
                    path = self.store.session_dir / event.payload["report_path"]
                    return ValidationReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
        return None

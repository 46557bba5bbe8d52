"""The Decision Bank.

Goals, binary design questions, and decisions (elicited or custom), all
derived by folding the session event log. ``BankState.apply`` is the single
fold step used both by the live engine and by :func:`replay`, so the two can
never disagree; it raises :class:`CorruptLog` when a log references ids that
don't exist or resolves things out of order.
"""

from __future__ import annotations

import posixpath
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import (
    AlreadyResolved,
    CorruptLog,
    EmptyGoal,
    EmptyTitle,
    InvalidAnswer,
    MalformedQuestion,
    NoActiveGoal,
    NoChange,
    RevokedDecision,
    UnknownDecision,
    UnknownQuestion,
)
from .events import SessionEvent

DEFAULT_DISPLAY_CAP = 5

# Question words we strip when restating a question as a decision title.
_MODALS = ("should", "must", "shall", "can", "could", "would", "will", "may", "do", "does", "did")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class Goal:
    id: str
    text: str
    created_at: str
    status: str = "active"  # active | superseded

    def to_dict(self) -> dict:
        return {"id": self.id, "text": self.text, "created_at": self.created_at, "status": self.status}


@dataclass(frozen=True)
class CodeRef:
    path: str
    line_start: int
    line_end: int
    excerpt: str = ""

    def validate(self) -> None:
        if self.line_start < 1 or self.line_start > self.line_end:
            raise MalformedQuestion(f"bad line range {self.line_start}..{self.line_end} for {self.path}")
        norm = posixpath.normpath(self.path)
        if norm.startswith("..") or posixpath.isabs(self.path):
            raise MalformedQuestion(f"code ref path escapes the project: {self.path}")

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "line_start": self.line_start,
            "line_end": self.line_end,
            "excerpt": self.excerpt,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CodeRef":
        return cls(
            path=data["path"],
            line_start=data["line_start"],
            line_end=data["line_end"],
            excerpt=data.get("excerpt", ""),
        )


@dataclass
class Question:
    id: str
    title: str
    yes_rationale: str
    no_rationale: str
    code_refs: list[CodeRef]
    origin_goal: str
    created_at: str
    status: str = "pending"  # pending | answered | dismissed
    decision_id: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "yes_rationale": self.yes_rationale,
            "no_rationale": self.no_rationale,
            "code_refs": [ref.to_dict() for ref in self.code_refs],
            "origin_goal": self.origin_goal,
            "created_at": self.created_at,
            "status": self.status,
            "decision_id": self.decision_id,
        }


@dataclass
class Decision:
    id: str
    origin: str  # elicited | custom
    title: str
    answer: str  # yes | no | not-applicable
    comment: str
    created_at: str
    question_id: Optional[str] = None
    status: str = "active"  # active | revoked
    revisions: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "origin": self.origin,
            "title": self.title,
            "answer": self.answer,
            "comment": self.comment,
            "created_at": self.created_at,
            "question_id": self.question_id,
            "status": self.status,
            "revisions": list(self.revisions),
        }


@dataclass
class BankView:
    goal: Optional[Goal]
    pending: list[Question]
    decisions: list[Decision]
    revoked: list[Decision]
    backlog: int  # pending questions beyond the display cap

    def to_dict(self) -> dict:
        return {
            "goal": self.goal.to_dict() if self.goal else None,
            "pending": [q.to_dict() for q in self.pending],
            "decisions": [d.to_dict() for d in self.decisions],
            "revoked": [d.to_dict() for d in self.revoked],
            "backlog": self.backlog,
        }


# ---------------------------------------------------------------------------
# Title helpers
# ---------------------------------------------------------------------------


def normalize_title(title: str) -> str:
    """Dedup key: lowercase, whitespace collapsed, trailing punctuation gone."""
    return " ".join(title.split()).lower().rstrip("?!.,;: ")


def derive_decision_title(question_title: str, answer: str) -> str:
    """Restate a yes/no question as a declarative decision title.

    Strips the leading modal; "<modal> X be Y?" becomes "X is/are Y". A "no"
    answer gets the "(declined)" suffix. Purely mechanical on purpose: the
    result always shares the question's subject phrase.
    """
    text = question_title.strip().rstrip("?").strip()
    words = text.split()
    if words and words[0].lower() in _MODALS:
        rest = words[1:]
        lowered = [w.lower() for w in rest]
        if "be" in lowered:
            split = lowered.index("be")
            subject, predicate = rest[:split], rest[split + 1:]
            plural = bool(subject) and subject[-1].lower().endswith("s") and not subject[-1].lower().endswith("ss")
            words = subject + ["are" if plural else "is"] + predicate
        else:
            words = rest
    sentence = " ".join(words)
    if sentence:
        sentence = sentence[0].upper() + sentence[1:]
    if answer == "no":
        sentence += " (declined)"
    return sentence


def question_is_wellformed(title: str, yes_rationale: str, no_rationale: str) -> bool:
    return title.strip().endswith("?") and bool(yes_rationale.strip() or no_rationale.strip())


# ---------------------------------------------------------------------------
# Fold state
# ---------------------------------------------------------------------------

_BANK_KINDS = {
    "GoalSet",
    "QuestionIngested",
    "QuestionAnswered",
    "QuestionDismissed",
    "DecisionRecorded",
    "DecisionRevised",
    "DecisionRevoked",
}


class BankState:
    """Fold of the bank-relevant event kinds; other kinds pass through."""

    def __init__(self, display_cap: int = DEFAULT_DISPLAY_CAP):
        self.display_cap = display_cap
        self.goals: dict[str, Goal] = {}
        self.active_goal_id: Optional[str] = None
        self.questions: dict[str, Question] = {}
        self.question_order: list[str] = []
        self.decisions: dict[str, Decision] = {}
        self.decision_order: list[str] = []
        self._title_index: dict[str, str] = {}  # normalized title -> question id

    # -- fold -----------------------------------------------------------------

    def apply(self, event: SessionEvent) -> None:
        if event.kind not in _BANK_KINDS:
            return
        handler = getattr(self, f"_apply_{event.kind}")
        handler(event.payload)

    def _apply_GoalSet(self, p: dict) -> None:
        if self.active_goal_id is not None:
            self.goals[self.active_goal_id].status = "superseded"
        goal = Goal(id=p["goal_id"], text=p["text"], created_at=p["created_at"])
        self.goals[goal.id] = goal
        self.active_goal_id = goal.id

    def _apply_QuestionIngested(self, p: dict) -> None:
        if p["question_id"] in self.questions:
            raise CorruptLog(f"duplicate question id {p['question_id']}")
        if p["origin_goal"] not in self.goals:
            raise CorruptLog(f"question {p['question_id']} names unknown goal {p['origin_goal']}")
        key = normalize_title(p["title"])
        if key in self._title_index:
            raise CorruptLog(f"duplicate question title {p['title']!r}")
        question = Question(
            id=p["question_id"],
            title=p["title"],
            yes_rationale=p["yes_rationale"],
            no_rationale=p["no_rationale"],
            code_refs=[CodeRef.from_dict(r) for r in p["code_refs"]],
            origin_goal=p["origin_goal"],
            created_at=p["created_at"],
        )
        self.questions[question.id] = question
        self.question_order.append(question.id)
        self._title_index[key] = question.id

    def _apply_QuestionAnswered(self, p: dict) -> None:
        question = self.questions.get(p["question_id"])
        if question is None:
            raise CorruptLog(f"answer for unknown question {p['question_id']}")
        if question.status != "pending":
            raise CorruptLog(f"answer for {question.status} question {question.id}")
        question.status = "answered"
        question.decision_id = p["decision_id"]

    def _apply_QuestionDismissed(self, p: dict) -> None:
        question = self.questions.get(p["question_id"])
        if question is None:
            raise CorruptLog(f"dismissal of unknown question {p['question_id']}")
        if question.status != "pending":
            raise CorruptLog(f"dismissal of {question.status} question {question.id}")
        question.status = "dismissed"

    def _apply_DecisionRecorded(self, p: dict) -> None:
        if p["decision_id"] in self.decisions:
            raise CorruptLog(f"duplicate decision id {p['decision_id']}")
        question_id = p.get("question_id")
        if p["origin"] == "elicited":
            question = self.questions.get(question_id)
            if question is None:
                raise CorruptLog(f"decision {p['decision_id']} names unknown question {question_id}")
            if question.decision_id != p["decision_id"]:
                raise CorruptLog(f"decision {p['decision_id']} recorded before its question was answered")
        elif self.active_goal_id is None:
            raise CorruptLog(f"custom decision {p['decision_id']} with no active goal")
        decision = Decision(
            id=p["decision_id"],
            origin=p["origin"],
            title=p["title"],
            answer=p["answer"],
            comment=p.get("comment", ""),
            created_at=p["created_at"],
            question_id=question_id,
        )
        self.decisions[decision.id] = decision
        self.decision_order.append(decision.id)

    def _apply_DecisionRevised(self, p: dict) -> None:
        decision = self.decisions.get(p["decision_id"])
        if decision is None:
            raise CorruptLog(f"revision of unknown decision {p['decision_id']}")
        if decision.status != "active":
            raise CorruptLog(f"revision of revoked decision {decision.id}")
        decision.revisions.append(
            {
                "ts": p["revised_at"],
                "title": decision.title,
                "answer": decision.answer,
                "comment": decision.comment,
            }
        )
        decision.title = p["title"]
        decision.answer = p["answer"]
        decision.comment = p["comment"]

    def _apply_DecisionRevoked(self, p: dict) -> None:
        decision = self.decisions.get(p["decision_id"])
        if decision is None:
            raise CorruptLog(f"revocation of unknown decision {p['decision_id']}")
        if decision.status != "active":
            raise CorruptLog(f"double revocation of decision {decision.id}")
        decision.status = "revoked"

    # -- reads ------------------------------------------------------------------

    def active_goal(self) -> Optional[Goal]:
        return self.goals.get(self.active_goal_id) if self.active_goal_id else None

    def pending_questions(self) -> list[Question]:
        return [self.questions[qid] for qid in self.question_order if self.questions[qid].status == "pending"]

    def find_by_title(self, title: str) -> Optional[Question]:
        qid = self._title_index.get(normalize_title(title))
        return self.questions.get(qid) if qid else None

    def active_decisions(self) -> list[Decision]:
        return [self.decisions[did] for did in self.decision_order if self.decisions[did].status == "active"]

    def revoked_decisions(self) -> list[Decision]:
        return [self.decisions[did] for did in self.decision_order if self.decisions[did].status == "revoked"]

    def view(self) -> BankView:
        pending = self.pending_questions()
        return BankView(
            goal=self.active_goal(),
            pending=pending[: self.display_cap],
            decisions=self.active_decisions(),
            revoked=self.revoked_decisions(),
            backlog=max(0, len(pending) - self.display_cap),
        )


def replay(events: list[SessionEvent], display_cap: int = DEFAULT_DISPLAY_CAP) -> BankView:
    """Deterministic fold of a full log into a bank view."""
    state = BankState(display_cap=display_cap)
    for event in events:
        state.apply(event)
    return state.view()


# ---------------------------------------------------------------------------
# Live operations
# ---------------------------------------------------------------------------


class DecisionBank:
    """Live bank: validates an operation, emits its events, applies them.

    ``emit(kind, payload) -> SessionEvent`` is the single-writer append hook;
    the caller (the engine) serializes access.
    """

    def __init__(
        self,
        state: BankState,
        emit: Callable[[str, dict], SessionEvent],
        new_id: Callable[[], str],
        now: Callable[[], str],
    ):
        self.state = state
        self._emit = emit
        self._new_id = new_id
        self._now = now

    def set_goal(self, text: str) -> Goal:
        text = text.strip()
        if not text:
            raise EmptyGoal("goal text is empty")
        goal_id = self._new_id()
        self._emit("GoalSet", {"goal_id": goal_id, "text": text, "created_at": self._now()})
        return self.state.goals[goal_id]

    def ingest_question(
        self,
        title: str,
        yes_rationale: str = "",
        no_rationale: str = "",
        code_refs: Optional[list[CodeRef]] = None,
    ) -> Question:
        if self.state.active_goal_id is None:
            raise NoActiveGoal("cannot ingest a question before a goal is set")
        title = " ".join(title.split())
        if not question_is_wellformed(title, yes_rationale, no_rationale):
            raise MalformedQuestion(f"not a yes/no question with rationale: {title!r}")
        for ref in code_refs or []:
            ref.validate()
        existing = self.state.find_by_title(title)
        if existing is not None:
            return existing
        question_id = self._new_id()
        self._emit(
            "QuestionIngested",
            {
                "question_id": question_id,
                "title": title,
                "yes_rationale": yes_rationale,
                "no_rationale": no_rationale,
                "code_refs": [ref.to_dict() for ref in code_refs or []],
                "origin_goal": self.state.active_goal_id,
                "created_at": self._now(),
            },
        )
        return self.state.questions[question_id]

    def answer_question(self, question_id: str, answer: str, comment: str = "") -> Decision:
        question = self.state.questions.get(question_id)
        if question is None:
            raise UnknownQuestion(question_id)
        if question.status != "pending":
            raise AlreadyResolved(f"question {question_id} is {question.status}")
        if answer not in ("yes", "no"):
            raise InvalidAnswer(f"elicited decisions take yes or no, got {answer!r}")
        decision_id = self._new_id()
        self._emit("QuestionAnswered", {"question_id": question_id, "decision_id": decision_id})
        self._emit(
            "DecisionRecorded",
            {
                "decision_id": decision_id,
                "origin": "elicited",
                "question_id": question_id,
                "title": derive_decision_title(question.title, answer),
                "answer": answer,
                "comment": comment or "",
                "created_at": self._now(),
            },
        )
        return self.state.decisions[decision_id]

    def dismiss_question(self, question_id: str) -> Question:
        question = self.state.questions.get(question_id)
        if question is None:
            raise UnknownQuestion(question_id)
        if question.status != "pending":
            raise AlreadyResolved(f"question {question_id} is {question.status}")
        self._emit("QuestionDismissed", {"question_id": question_id})
        return question

    def add_custom_decision(self, title: str, comment: str = "") -> Decision:
        if self.state.active_goal_id is None:
            raise NoActiveGoal("cannot add a decision before a goal is set")
        title = title.strip()
        if not title:
            raise EmptyTitle("decision title is empty")
        decision_id = self._new_id()
        self._emit(
            "DecisionRecorded",
            {
                "decision_id": decision_id,
                "origin": "custom",
                "question_id": None,
                "title": title,
                "answer": "not-applicable",
                "comment": comment or "",
                "created_at": self._now(),
            },
        )
        return self.state.decisions[decision_id]

    def edit_decision(
        self,
        decision_id: str,
        new_answer: Optional[str] = None,
        new_comment: Optional[str] = None,
        new_title: Optional[str] = None,
    ) -> Decision:
        decision = self.state.decisions.get(decision_id)
        if decision is None:
            raise UnknownDecision(decision_id)
        if decision.status != "active":
            raise RevokedDecision(f"decision {decision_id} is revoked")

        title = new_title if new_title is not None else decision.title
        answer = new_answer if new_answer is not None else decision.answer
        comment = new_comment if new_comment is not None else decision.comment
        if new_answer is not None:
            if decision.origin == "custom":
                raise InvalidAnswer("custom decisions have no yes/no answer")
            if new_answer not in ("yes", "no"):
                raise InvalidAnswer(f"elicited decisions take yes or no, got {new_answer!r}")
            # Re-derive an untouched mechanical title so it tracks the flip.
            if new_title is None and decision.question_id:
                question = self.state.questions[decision.question_id]
                if decision.title == derive_decision_title(question.title, decision.answer):
                    title = derive_decision_title(question.title, new_answer)
        if (title, answer, comment) == (decision.title, decision.answer, decision.comment):
            raise NoChange(f"decision {decision_id} unchanged")
        self._emit(
            "DecisionRevised",
            {
                "decision_id": decision_id,
                "title": title,
                "answer": answer,
                "comment": comment,
                "revised_at": self._now(),
            },
        )
        return decision

    def revoke_decision(self, decision_id: str) -> Decision:
        decision = self.state.decisions.get(decision_id)
        if decision is None:
            raise UnknownDecision(decision_id)
        if decision.status != "active":
            raise RevokedDecision(f"decision {decision_id} is revoked")
        self._emit("DecisionRevoked", {"decision_id": decision_id})
        return decision

    def bank_view(self) -> BankView:
        return self.state.view()

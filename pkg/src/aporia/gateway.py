"""Engine-side tool server for the agents.

Exactly two tools are registered: ``submit_argument`` (questioner, planner)
and ``submit_uuid_to_test_suite_mapping`` (planner only). A call validates
the caller's role and the payload against the published JSON Schema before
touching any state, so a failed call never appends an event.
"""

from __future__ import annotations

import posixpath
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema

from .bank import CodeRef
from .errors import RevokedDecision, RoleForbidden, SchemaViolation, UnknownDecision

SUBMIT_ARGUMENT = "submit_argument"
SUBMIT_MAPPING = "submit_uuid_to_test_suite_mapping"

MAX_EXCERPT_LINES = 60

ARGUMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "question_title": {"type": "string"},
        "yes_rationale": {"type": "string"},
        "no_rationale": {"type": "string"},
        "code_refs": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "path": {"type": "string"},
                    "line_start": {"type": "integer", "minimum": 1},
                    "line_end": {"type": "integer", "minimum": 1},
                },
                "required": ["path", "line_start", "line_end"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["question_title"],
    "additionalProperties": False,
}

MAPPING_SCHEMA = {
    "type": "object",
    "properties": {
        "decision_id": {"type": "string"},
        "suite_name": {"type": "string", "pattern": r"^[A-Za-z_][A-Za-z0-9_]*$"},
        "suite_path": {"type": "string"},
    },
    "required": ["decision_id", "suite_name", "suite_path"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    input_schema: dict
    allowed_roles: frozenset[str]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "input_schema": self.input_schema,
            "allowed_roles": sorted(self.allowed_roles),
        }


DESCRIPTORS = (
    ToolDescriptor(
        name=SUBMIT_ARGUMENT,
        description="Store a binary design question with yes/no rationales and code references.",
        input_schema=ARGUMENT_SCHEMA,
        allowed_roles=frozenset({"questioner", "planner"}),
    ),
    ToolDescriptor(
        name=SUBMIT_MAPPING,
        description="Map a decision id to the test suite that validates it.",
        input_schema=MAPPING_SCHEMA,
        allowed_roles=frozenset({"planner"}),
    ),
)


class ToolGateway:
    """Dispatches validated tool calls into the host engine.

    The host provides ``ingest_question``, ``record_suite_link`` and
    ``decision_status``; the gateway itself keeps no state per call.
    """

    def __init__(self, host, project_root: Optional[Path] = None):
        self._host = host
        self._project_root = Path(project_root) if project_root else None

    def list_tools(self) -> list[ToolDescriptor]:
        return list(DESCRIPTORS)

    def call(self, name: str, caller: str, payload: dict) -> dict:
        if name == SUBMIT_ARGUMENT:
            return self.call_submit_argument(caller, payload)
        if name == SUBMIT_MAPPING:
            return self.call_submit_mapping(caller, payload)
        raise SchemaViolation(f"unknown tool {name!r}")

    # -- tools ---------------------------------------------------------------

    def call_submit_argument(self, caller: str, payload: dict) -> dict:
        self._check_role(SUBMIT_ARGUMENT, caller)
        self._validate(ARGUMENT_SCHEMA, payload)
        refs = [
            CodeRef(
                path=r["path"],
                line_start=r["line_start"],
                line_end=r["line_end"],
                excerpt=self._read_excerpt(r["path"], r["line_start"], r["line_end"]),
            )
            for r in payload.get("code_refs", [])
        ]
        question = self._host.ingest_question(
            title=payload["question_title"],
            yes_rationale=payload.get("yes_rationale", ""),
            no_rationale=payload.get("no_rationale", ""),
            code_refs=refs,
        )
        return {"question_id": question.id}

    def call_submit_mapping(self, caller: str, payload: dict) -> dict:
        self._check_role(SUBMIT_MAPPING, caller)
        self._validate(MAPPING_SCHEMA, payload)
        status = self._host.decision_status(payload["decision_id"])
        if status is None:
            raise UnknownDecision(payload["decision_id"])
        if status != "active":
            raise RevokedDecision(f"decision {payload['decision_id']} is revoked")
        path = payload["suite_path"]
        if posixpath.isabs(path) or posixpath.normpath(path).startswith(".."):
            raise SchemaViolation(f"suite_path escapes the project: {path}")
        link = self._host.record_suite_link(
            decision_id=payload["decision_id"],
            suite_name=payload["suite_name"],
            suite_path=path,
        )
        return {"link_id": link.link_id}

    # -- helpers -----------------------------------------------------------------

    def _check_role(self, tool: str, caller: str) -> None:
        descriptor = next(d for d in DESCRIPTORS if d.name == tool)
        if caller not in descriptor.allowed_roles:
            raise RoleForbidden(f"role {caller!r} may not call {tool}")

    @staticmethod
    def _validate(schema: dict, payload: dict) -> None:
        try:
            jsonschema.validate(payload, schema)
        except jsonschema.ValidationError as exc:
            raise SchemaViolation(exc.message) from exc

    def _read_excerpt(self, path: str, line_start: int, line_end: int) -> str:
        if self._project_root is None:
            return ""
        if posixpath.isabs(path) or posixpath.normpath(path).startswith(".."):
            return ""
        target = self._project_root / path
        try:
            lines = target.read_text(encoding="utf-8", errors="replace").splitlines()
        except OSError:
            return ""
        end = min(line_end, line_start + MAX_EXCERPT_LINES - 1)
        return "\n".join(lines[line_start - 1 : end])

"""Domain error hierarchy.

Every error carries a stable ``code`` (its class name) that surfaces
unchanged through the CLI (stderr / ``--json``) and the HTTP error
envelope, so clients can match on it.
"""

from __future__ import annotations


class DomainError(Exception):
    """Base class for all engine-level errors."""

    #: HTTP status the api layer maps this error to.
    http_status = 400

    @property
    def code(self) -> str:
        return type(self).__name__

    def envelope(self) -> dict:
        return {"code": self.code, "message": str(self), "details": {}}


# --- decision bank ---------------------------------------------------------

class EmptyGoal(DomainError):
    pass


class NoActiveGoal(DomainError):
    http_status = 409


class MalformedQuestion(DomainError):
    pass


class UnknownQuestion(DomainError):
    http_status = 404


class AlreadyResolved(DomainError):
    http_status = 409


class EmptyTitle(DomainError):
    pass


class UnknownDecision(DomainError):
    http_status = 404


class RevokedDecision(DomainError):
    """The decision was revoked and accepts no further edits."""

    http_status = 409


class NoChange(DomainError):
    pass


class InvalidAnswer(DomainError):
    """Answer value not allowed for this decision's origin."""


class CorruptLog(DomainError):
    """Event log violates prefix consistency (dangling id, bad order)."""


# --- orchestrator / backends -----------------------------------------------

class BackendSpawnFailure(DomainError):
    http_status = 503


class HandshakeTimeout(DomainError):
    http_status = 503


class SessionDown(DomainError):
    http_status = 503


class UnknownSession(DomainError):
    http_status = 404


class NoDecisions(DomainError):
    http_status = 409


# --- tool gateway -----------------------------------------------------------

class RoleForbidden(DomainError):
    http_status = 403


class SchemaViolation(DomainError):
    pass


# --- plan document ----------------------------------------------------------

class DanglingLink(DomainError):
    pass


class CorruptAnchors(DomainError):
    pass


# --- validation runner -------------------------------------------------------

class TestCommandMissing(DomainError):
    http_status = 409


class ProjectRootMissing(DomainError):
    http_status = 409


class Busy(DomainError):
    http_status = 409


# --- session store ------------------------------------------------------------

class StoreClosed(DomainError):
    pass


class IoFailure(DomainError):
    http_status = 503


class SessionLocked(DomainError):
    """Another writer holds the session lock file."""

    http_status = 409


# --- api / cli -----------------------------------------------------------------

class InvalidSeq(DomainError):
    pass


class PortInUse(DomainError):
    http_status = 503


class ScriptParse(DomainError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class StepFailed(DomainError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step

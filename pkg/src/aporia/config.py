"""Session configuration.

A snapshot of the config is persisted in ``meta.json`` when a session is
created; reopening a session restores it so behaviour stays stable across
process restarts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict


@dataclass
class TestConfig:
    """How decision-linked suites get executed (validation_runner)."""

    # Template placeholders: {suite} {path} {report}. Empty = not configured.
    command_template: str = ""
    report_format: str = "junit"
    timeout_secs: float = 60.0


@dataclass
class SessionConfig:
    # Max question bubbles shown at once; backlog stays queued.
    display_cap: int = 5
    handshake_timeout_secs: float = 10.0
    turn_timeout_secs: float = 120.0
    # Directory of role prompt templates; empty = packaged defaults.
    prompts_dir: str = ""
    # How named suites and their cases are located inside test files.
    suite_regex: str = r"^class\s+(?P<name>\w+)"
    case_regex: str = r"^\s+def\s+(?P<name>test_\w+)"
    test: TestConfig = field(default_factory=TestConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        test = TestConfig(**data.get("test", {}))
        fields = ("display_cap", "handshake_timeout_secs", "turn_timeout_secs", "prompts_dir", "suite_regex", "case_regex")
        known = {k: v for k, v in data.items() if k in fields}
        return cls(test=test, **known)

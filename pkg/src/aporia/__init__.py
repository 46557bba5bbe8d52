"""Decision-oriented programming engine.

Elicits binary design questions from a questioner agent, records answers as
first-class decisions in a persistent Decision Bank, maps each decision to a
generated test suite, drives an implementer agent, and validates the code
against the decisions.
"""

from .bank import BankView, CodeRef, Decision, Goal, Question, replay
from .config import SessionConfig, TestConfig
from .engine import Engine
from .events import SessionEvent, snapshot_digest
from .ids import Clock, FixedClock, IdSource, SeededIds

__version__ = "0.1.0"

__all__ = [
    "BankView",
    "Clock",
    "CodeRef",
    "Decision",
    "Engine",
    "FixedClock",
    "Goal",
    "IdSource",
    "Question",
    "SeededIds",
    "SessionConfig",
    "SessionEvent",
    "TestConfig",
    "replay",
    "snapshot_digest",
    "__version__",
]

from __future__ import annotations

import pytest

from aporia.config import SessionConfig, TestConfig
from aporia.engine import Engine
from aporia.errors import TestCommandMissing
from aporia.ids import FixedClock, SeededIds

# Library classes whose names start with "Test"; keep pytest from collecting them.
TestConfig.__test__ = False
TestCommandMissing.__test__ = False


@pytest.fixture
def project(tmp_path):
    root = tmp_path / "project"
    (root / "app").mkdir(parents=True)
    (root / "tests").mkdir()
    (root / "app" / "views.py").write_text(
        "def paper_details(user, paper):\n"
        "    # every field is visible to everyone for now\n"
        "    return paper.fields()\n",
        encoding="utf-8",
    )
    return root


@pytest.fixture
def engine(tmp_path, project):
    eng = Engine.create(
        tmp_path / "session",
        project,
        SessionConfig(test=TestConfig(command_template="true", report_format="junit")),
        id_source=SeededIds(7),
        clock=FixedClock(),
    )
    yield eng
    eng.close()


def make_engine(tmp_path, project, seed=7, config=None):
    return Engine.create(
        tmp_path / f"session-{seed}",
        project,
        config or SessionConfig(),
        id_source=SeededIds(seed),
        clock=FixedClock(),
    )

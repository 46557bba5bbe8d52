"""Agent backends: the peers the orchestrator drives over JSON-RPC."""

from .base import BackendConnection, BackendEndpoint
from .scripted import ScriptedBackendFactory, load_fixture
from .process import ProcessBackendFactory

__all__ = [
    "BackendConnection",
    "BackendEndpoint",
    "ScriptedBackendFactory",
    "ProcessBackendFactory",
    "load_fixture",
]

"""Orchestrator event vocabulary and a minimal in-process event bus."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List

log = logging.getLogger(__name__)


class EventKind(Enum):
    TASK_STARTED = "TASK_STARTED"
    TASK_COMPLETED = "TASK_COMPLETED"
    TASK_FAILED = "TASK_FAILED"
    CONSTELLATION_MODIFIED = "CONSTELLATION_MODIFIED"


@dataclass(frozen=True)
class OrchestratorEvent:
    kind: EventKind
    task_id: str = ""
    at: float = 0.0
    payload: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {"kind": self.kind.value, "at": self.at}
        if self.task_id:
            doc["task_id"] = self.task_id
        if self.payload:
            doc["payload"] = self.payload
        return doc


Handler = Callable[[OrchestratorEvent], None]


class EventBus:
    """Synchronous publish/subscribe; a failing handler is logged, never
    allowed to break delivery to the remaining handlers."""

    def __init__(self) -> None:
        self._handlers: List[Handler] = []

    def subscribe(self, handler: Handler) -> None:
        self._handlers.append(handler)

    def publish(self, event: OrchestratorEvent) -> None:
        for handler in list(self._handlers):
            try:
                handler(event)
            except Exception:
                log.exception("event handler failed for %s", event.kind.value)

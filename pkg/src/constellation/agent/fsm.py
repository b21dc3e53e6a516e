"""Device-agent finite-state machine (CLI-agent state set)."""

from __future__ import annotations

from enum import Enum
from typing import Tuple

from ..errors import IllegalTransition


class AgentFsmState(Enum):
    CONTINUE = "CONTINUE"
    FINISH = "FINISH"
    FAIL = "FAIL"

    @property
    def terminal(self) -> bool:
        return self is not AgentFsmState.CONTINUE


def fsm_step(current: AgentFsmState, requested: AgentFsmState) -> Tuple[AgentFsmState, bool]:
    """Advance one step; returns (next state, round_end flag)."""
    if current.terminal:
        raise IllegalTransition(f"agent FSM already terminal in {current.value}")
    return requested, requested.terminal

from .fsm import AgentFsmState, fsm_step
from .executor import ScriptedExecutor
from .reasoner import ReasonerOutput, ScriptedReasoner
from .server import AgentServer, StrategyKind

__all__ = [
    "AgentFsmState",
    "fsm_step",
    "ScriptedExecutor",
    "ReasonerOutput",
    "ScriptedReasoner",
    "AgentServer",
    "StrategyKind",
]

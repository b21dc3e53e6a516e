"""Mutable dependency-DAG of tasks: the data model the whole engine runs on.

A constellation holds tasks keyed by id and directed dependency edges keyed
by id. All public single-op mutators validate their preconditions, mutate in
place and bump the version counter by one. Batched, atomic edits live in
``edits.py``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple

from .conditions import ConditionRegistry, default_registry
from .errors import (
    CycleIntroduced,
    DuplicateEdge,
    DuplicateId,
    IllegalField,
    ImmutableTask,
    NotFound,
    UnknownCondition,
)


class TaskStatus(Enum):
    PENDING = "PENDING"
    RUNNING = "RUNNING"
    COMPLETED = "COMPLETED"
    FAILED = "FAILED"

    @property
    def terminal(self) -> bool:
        return self in (TaskStatus.COMPLETED, TaskStatus.FAILED)


# PENDING -> FAILED covers planner cancellation and the dependency timeout
# policy; terminal states have no outgoing transitions.
_LEGAL_TRANSITIONS = {
    (TaskStatus.PENDING, TaskStatus.RUNNING),
    (TaskStatus.RUNNING, TaskStatus.COMPLETED),
    (TaskStatus.RUNNING, TaskStatus.FAILED),
    (TaskStatus.PENDING, TaskStatus.FAILED),
}


class FailureReason(Enum):
    EXECUTION_ERROR = "EXECUTION_ERROR"
    DEPENDENCY_UNSATISFIED = "DEPENDENCY_UNSATISFIED"
    AGENT_DISCONNECTED = "AGENT_DISCONNECTED"
    TIMEOUT = "TIMEOUT"
    PLANNER_CANCELLED = "PLANNER_CANCELLED"


class DependencyKind(Enum):
    UNCONDITIONAL = "UNCONDITIONAL"
    SUCCESS_ONLY = "SUCCESS_ONLY"
    CONDITIONAL = "CONDITIONAL"


@dataclass(frozen=True)
class DependencyType:
    kind: DependencyKind
    condition_id: Optional[str] = None

    def __post_init__(self):
        if self.kind is DependencyKind.CONDITIONAL and not self.condition_id:
            raise ValueError("CONDITIONAL dependency requires a condition_id")
        if self.kind is not DependencyKind.CONDITIONAL and self.condition_id:
            raise ValueError("condition_id only valid on CONDITIONAL dependencies")

    @classmethod
    def unconditional(cls) -> "DependencyType":
        return cls(DependencyKind.UNCONDITIONAL)

    @classmethod
    def success_only(cls) -> "DependencyType":
        return cls(DependencyKind.SUCCESS_ONLY)

    @classmethod
    def conditional(cls, condition_id: str) -> "DependencyType":
        return cls(DependencyKind.CONDITIONAL, condition_id)


# Fields an editor may patch on a task; status/result are engine-owned.
EDITABLE_TASK_FIELDS = ("name", "description", "device", "tips")
EDITABLE_EDGE_FIELDS = ("dep_type", "description")


@dataclass
class TaskStar:
    id: str
    device: str
    name: str = ""
    description: str = ""
    tips: List[str] = field(default_factory=list)
    status: TaskStatus = TaskStatus.PENDING
    result: Any = None
    failure_reason: Optional[FailureReason] = None

    def copy(self) -> "TaskStar":
        return replace(self, tips=list(self.tips), result=copy.deepcopy(self.result))


@dataclass
class TaskStarLine:
    id: str
    from_task: str
    to_task: str
    dep_type: DependencyType = field(default_factory=DependencyType.unconditional)
    description: str = ""

    def copy(self) -> "TaskStarLine":
        return replace(self)


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


class TaskConstellation:
    def __init__(self, request: str = "") -> None:
        self.request = request
        self.tasks: Dict[str, TaskStar] = {}
        self.edges: Dict[str, TaskStarLine] = {}
        self.version = 0

    # -- queries ---------------------------------------------------------

    def task(self, task_id: str) -> TaskStar:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise NotFound(f"no task {task_id!r}") from None

    def edge(self, edge_id: str) -> TaskStarLine:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise NotFound(f"no dependency {edge_id!r}") from None

    def incoming(self, task_id: str) -> List[TaskStarLine]:
        return [e for _, e in sorted(self.edges.items()) if e.to_task == task_id]

    def outgoing(self, task_id: str) -> List[TaskStarLine]:
        return [e for _, e in sorted(self.edges.items()) if e.from_task == task_id]

    def dependencies_of(self, task_id: str) -> List[str]:
        """Incoming edge ids of a task, the derived `dependencies` field."""
        return [e.id for e in self.incoming(task_id)]

    # -- single-op edits -------------------------------------------------

    def add_task(self, spec: Dict[str, Any]) -> "TaskConstellation":
        self._add_task(spec)
        self.version += 1
        return self

    def remove_task(self, task_id: str) -> "TaskConstellation":
        self._remove_task(task_id)
        self.version += 1
        return self

    def update_task(self, task_id: str, patch: Dict[str, Any]) -> "TaskConstellation":
        self._update_task(task_id, patch)
        self.version += 1
        return self

    def add_dependency(self, spec: Dict[str, Any]) -> "TaskConstellation":
        self._add_dependency(spec)
        self.version += 1
        return self

    def remove_dependency(self, edge_id: str) -> "TaskConstellation":
        self._remove_dependency(edge_id)
        self.version += 1
        return self

    def update_dependency(self, edge_id: str, patch: Dict[str, Any]) -> "TaskConstellation":
        self._update_dependency(edge_id, patch)
        self.version += 1
        return self

    # -- raw ops (no version bump; used by batched deltas) ---------------

    def _add_task(self, spec: Dict[str, Any]) -> None:
        task = _task_from_spec(spec)
        if task.id in self.tasks:
            raise DuplicateId(f"task id {task.id!r} already present")
        self.tasks[task.id] = task

    def _remove_task(self, task_id: str) -> None:
        task = self.task(task_id)
        if task.status is not TaskStatus.PENDING:
            raise ImmutableTask(f"task {task_id!r} is {task.status.value}")
        for edge in list(self.edges.values()):
            if task_id in (edge.from_task, edge.to_task):
                del self.edges[edge.id]
        del self.tasks[task_id]

    def _update_task(self, task_id: str, patch: Dict[str, Any]) -> None:
        task = self.task(task_id)
        if task.status is not TaskStatus.PENDING:
            raise ImmutableTask(f"task {task_id!r} is {task.status.value}")
        illegal = sorted(set(patch) - set(EDITABLE_TASK_FIELDS))
        if illegal:
            raise IllegalField(f"cannot patch {', '.join(illegal)} on task {task_id!r}")
        for key, value in patch.items():
            setattr(task, key, list(value) if key == "tips" else value)

    def _add_dependency(self, spec: Dict[str, Any]) -> None:
        edge = _edge_from_spec(spec)
        if edge.id in self.edges:
            raise DuplicateId(f"dependency id {edge.id!r} already present")
        if edge.from_task == edge.to_task:
            raise CycleIntroduced(f"self-dependency on {edge.from_task!r}")
        for existing in self.edges.values():
            if (existing.from_task, existing.to_task) == (edge.from_task, edge.to_task):
                raise DuplicateEdge(
                    f"edge {edge.from_task!r}->{edge.to_task!r} already exists as {existing.id!r}"
                )
        self.task(edge.from_task)
        target = self.task(edge.to_task)
        if target.status is not TaskStatus.PENDING:
            raise ImmutableTask(f"task {edge.to_task!r} is {target.status.value}")
        self.edges[edge.id] = edge
        cycle = self._find_cycle()
        if cycle:
            del self.edges[edge.id]
            raise CycleIntroduced(f"cycle through {{{', '.join(sorted(cycle))}}}")

    def _remove_dependency(self, edge_id: str) -> None:
        edge = self.edge(edge_id)
        target = self.task(edge.to_task)
        if target.status is not TaskStatus.PENDING:
            raise ImmutableTask(f"task {edge.to_task!r} is {target.status.value}")
        del self.edges[edge_id]

    def _update_dependency(self, edge_id: str, patch: Dict[str, Any]) -> None:
        edge = self.edge(edge_id)
        target = self.task(edge.to_task)
        if target.status is not TaskStatus.PENDING:
            raise ImmutableTask(f"task {edge.to_task!r} is {target.status.value}")
        illegal = sorted(set(patch) - set(EDITABLE_EDGE_FIELDS))
        if illegal:
            raise IllegalField(f"cannot patch {', '.join(illegal)} on dependency {edge_id!r}")
        for key, value in patch.items():
            if key == "dep_type" and not isinstance(value, DependencyType):
                value = _dep_type_from_spec(value)
            setattr(edge, key, value)

    # -- engine-owned status transitions ---------------------------------

    def transition(
        self,
        task_id: str,
        new_status: TaskStatus,
        result: Any = None,
        failure_reason: Optional[FailureReason] = None,
    ) -> None:
        task = self.task(task_id)
        if (task.status, new_status) not in _LEGAL_TRANSITIONS:
            raise IllegalTransitionError(task.status, new_status, task_id)
        task.status = new_status
        if new_status.terminal:
            task.result = result
            task.failure_reason = failure_reason

    # -- validation ------------------------------------------------------

    def validate(self) -> List[Violation]:
        violations: List[Violation] = []
        for edge in sorted(self.edges.values(), key=lambda e: e.id):
            for endpoint in (edge.from_task, edge.to_task):
                if endpoint not in self.tasks:
                    violations.append(
                        Violation("DanglingEdge", f"edge {edge.id!r} references missing task {endpoint!r}")
                    )
            if edge.from_task == edge.to_task:
                violations.append(Violation("SelfLoop", f"edge {edge.id!r} on {edge.from_task!r}"))
        seen_pairs: Set[Tuple[str, str]] = set()
        for edge in sorted(self.edges.values(), key=lambda e: e.id):
            pair = (edge.from_task, edge.to_task)
            if pair in seen_pairs:
                violations.append(
                    Violation("DuplicateEdge", f"multiple edges {pair[0]!r}->{pair[1]!r}")
                )
            seen_pairs.add(pair)
        cycle = self._find_cycle()
        if cycle:
            violations.append(
                Violation("CycleIntroduced", f"cycle through {{{', '.join(sorted(cycle))}}}")
            )
        for task in sorted(self.tasks.values(), key=lambda t: t.id):
            if task.result is not None and not task.status.terminal:
                violations.append(
                    Violation("StatusResult", f"task {task.id!r} has a result while {task.status.value}")
                )
        return violations

    def _find_cycle(self) -> Set[str]:
        """Kahn peel; returns the node set of the residual cyclic core."""
        indegree = {t: 0 for t in self.tasks}
        for edge in self.edges.values():
            if edge.to_task in indegree and edge.from_task in indegree:
                indegree[edge.to_task] += 1
        queue = sorted(t for t, d in indegree.items() if d == 0)
        remaining = dict(indegree)
        while queue:
            node = queue.pop(0)
            del remaining[node]
            for edge in self.outgoing(node):
                if edge.to_task in remaining:
                    remaining[edge.to_task] -= 1
                    if remaining[edge.to_task] == 0:
                        queue.append(edge.to_task)
            queue.sort()
        return set(remaining)

    # -- readiness -------------------------------------------------------

    def edge_satisfied(self, edge: TaskStarLine, registry: ConditionRegistry) -> bool:
        upstream = self.task(edge.from_task)
        kind = edge.dep_type.kind
        if kind is DependencyKind.UNCONDITIONAL:
            return upstream.status.terminal
        if kind is DependencyKind.SUCCESS_ONLY:
            return upstream.status is TaskStatus.COMPLETED
        if not upstream.status.terminal:
            return False
        return registry.evaluate(edge.dep_type.condition_id, upstream.result)

    def ready_tasks(self, registry: Optional[ConditionRegistry] = None) -> List[str]:
        """PENDING tasks whose incoming edges are all satisfied, id-sorted."""
        registry = registry or default_registry()
        ready = []
        for task_id in sorted(self.tasks):
            task = self.tasks[task_id]
            if task.status is not TaskStatus.PENDING:
                continue
            if all(self.edge_satisfied(e, registry) for e in self.incoming(task_id)):
                ready.append(task_id)
        return ready

    def is_quiescent(self, registry: Optional[ConditionRegistry] = None) -> bool:
        """True iff every task is terminal or can never become ready.

        A PENDING task is permanently blocked when some incoming edge can
        never be satisfied under any completion of the still-live tasks:
        a SUCCESS_ONLY upstream FAILED, a CONDITIONAL upstream terminal with
        a false predicate, or (transitively) an upstream that is itself
        permanently blocked.
        """
        registry = registry or default_registry()
        if any(t.status is TaskStatus.RUNNING for t in self.tasks.values()):
            return False
        # Optimistically assume every non-terminal task may still complete,
        # then peel off tasks proven blocked until a fixpoint.
        live = {t for t, task in self.tasks.items() if not task.status.terminal}
        changed = True
        while changed:
            changed = False
            for task_id in sorted(live):
                if self._edge_blocks(task_id, live, registry):
                    live.discard(task_id)
                    changed = True
        return not live

    def _edge_blocks(self, task_id: str, live: Set[str], registry: ConditionRegistry) -> bool:
        for edge in self.incoming(task_id):
            upstream = self.task(edge.from_task)
            kind = edge.dep_type.kind
            if upstream.status.terminal:
                if kind is DependencyKind.SUCCESS_ONLY and upstream.status is TaskStatus.FAILED:
                    return True
                if kind is DependencyKind.CONDITIONAL and not registry.evaluate(
                    edge.dep_type.condition_id, upstream.result
                ):
                    return True
            elif edge.from_task not in live:
                return True
        return False

    # -- copies and equality ---------------------------------------------

    def clone(self) -> "TaskConstellation":
        other = TaskConstellation(self.request)
        other.version = self.version
        other.tasks = {tid: t.copy() for tid, t in self.tasks.items()}
        other.edges = {eid: e.copy() for eid, e in self.edges.items()}
        return other

    def structurally_equal(self, other: "TaskConstellation") -> bool:
        from .serial import serialize

        return serialize(self) == serialize(other)


class IllegalTransitionError(ImmutableTask):
    def __init__(self, old: TaskStatus, new: TaskStatus, task_id: str):
        super().__init__(f"illegal transition {old.value}->{new.value} on task {task_id!r}")
        self.old = old
        self.new = new


def _task_from_spec(spec: Dict[str, Any]) -> TaskStar:
    if isinstance(spec, TaskStar):
        return spec.copy()
    known = {"id", "name", "description", "device", "tips"}
    unknown = sorted(set(spec) - known)
    if unknown:
        raise IllegalField(f"unknown task fields: {', '.join(unknown)}")
    if not spec.get("id"):
        raise IllegalField("task spec requires a non-empty id")
    return TaskStar(
        id=spec["id"],
        name=spec.get("name", spec["id"]),
        description=spec.get("description", ""),
        device=spec.get("device", ""),
        tips=list(spec.get("tips", [])),
    )


def _dep_type_from_spec(value: Any) -> DependencyType:
    if isinstance(value, DependencyType):
        return value
    if isinstance(value, str):
        kind = DependencyKind(value)
        if kind is DependencyKind.CONDITIONAL:
            raise IllegalField("CONDITIONAL dependency spec requires a condition_id")
        return DependencyType(kind)
    kind = DependencyKind(value["kind"])
    return DependencyType(kind, value.get("condition_id"))


def _edge_from_spec(spec: Dict[str, Any]) -> TaskStarLine:
    if isinstance(spec, TaskStarLine):
        return spec.copy()
    if not spec.get("id"):
        raise IllegalField("dependency spec requires a non-empty id")
    for endpoint in ("from_task", "to_task"):
        if not spec.get(endpoint):
            raise IllegalField(f"dependency spec requires {endpoint}")
    raw_dep_type = spec.get("dep_type", "UNCONDITIONAL")
    if isinstance(raw_dep_type, str) and spec.get("condition_id"):
        raw_dep_type = {"kind": raw_dep_type, "condition_id": spec["condition_id"]}
    dep_type = _dep_type_from_spec(raw_dep_type)
    return TaskStarLine(
        id=spec["id"],
        from_task=spec["from_task"],
        to_task=spec["to_task"],
        dep_type=dep_type,
        description=spec.get("description", ""),
    )

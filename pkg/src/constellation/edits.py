"""Batched, atomic constellation edits.

A delta is an ordered list of edit ops applied to a clone of the pre-state;
either every op commits and the version rises by exactly one, or the
pre-state is left untouched and the per-op error propagates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .errors import ImmutableTask, ParseError, ValidationFailed
from .model import TaskConstellation, TaskStatus, Violation


@dataclass(frozen=True)
class AddTask:
    spec: Dict[str, Any]


@dataclass(frozen=True)
class RemoveTask:
    task_id: str


@dataclass(frozen=True)
class UpdateTask:
    task_id: str
    patch: Dict[str, Any]


@dataclass(frozen=True)
class AddDependency:
    spec: Dict[str, Any]


@dataclass(frozen=True)
class RemoveDependency:
    edge_id: str


@dataclass(frozen=True)
class UpdateDependency:
    edge_id: str
    patch: Dict[str, Any]


@dataclass(frozen=True)
class BuildConstellation:
    config: Dict[str, Any]
    clear: bool = True


EditOp = Any  # one of the dataclasses above


@dataclass
class EditDelta:
    ops: List[EditOp] = field(default_factory=list)
    provenance: str = ""

    def __bool__(self) -> bool:
        return bool(self.ops)


@dataclass
class ModificationSummary:
    """Per-delta change counts, one bucket per edit category."""

    added_tasks: int = 0
    removed_tasks: int = 0
    modified_tasks: int = 0
    added_dependencies: int = 0
    removed_dependencies: int = 0
    modified_dependencies: int = 0

    @property
    def total(self) -> int:
        return (
            self.added_tasks
            + self.removed_tasks
            + self.modified_tasks
            + self.added_dependencies
            + self.removed_dependencies
            + self.modified_dependencies
        )

    def as_dict(self) -> Dict[str, int]:
        return {
            "added_tasks": self.added_tasks,
            "removed_tasks": self.removed_tasks,
            "modified_tasks": self.modified_tasks,
            "added_dependencies": self.added_dependencies,
            "removed_dependencies": self.removed_dependencies,
            "modified_dependencies": self.modified_dependencies,
        }


def build_constellation(
    config: Dict[str, Any],
    clear: bool = True,
    base: Optional[TaskConstellation] = None,
) -> TaskConstellation:
    """Batch-create tasks and dependencies from structured input, atomically."""
    if clear or base is None:
        target = TaskConstellation(config.get("request", base.request if base else ""))
        if base is not None:
            target.version = base.version
            non_pending = sorted(
                t.id for t in base.tasks.values() if t.status is not TaskStatus.PENDING
            )
            if non_pending:
                raise ImmutableTask(
                    f"cannot clear constellation with non-PENDING tasks: {', '.join(non_pending)}"
                )
    else:
        target = base.clone()
        if config.get("request"):
            target.request = config["request"]
    violations: List[Violation] = []
    for task_spec in config.get("tasks", []):
        try:
            target._add_task(task_spec)
        except Exception as exc:  # collect, report the full list
            violations.append(Violation("BadTask", str(exc)))
    for edge_spec in config.get("dependencies", []):
        try:
            target._add_dependency(edge_spec)
        except Exception as exc:
            violations.append(Violation("BadDependency", str(exc)))
    violations.extend(target.validate())
    if violations:
        raise ValidationFailed(violations)
    target.version += 1
    return target


def apply_delta(
    constellation: TaskConstellation, delta: EditDelta
) -> Tuple[TaskConstellation, ModificationSummary]:
    """Apply every op in order on a clone; commit bumps version once.

    Any per-op failure aborts the whole delta and propagates; the caller's
    pre-state object is never mutated.
    """
    working = constellation.clone()
    summary = ModificationSummary()
    for op in delta.ops:
        if isinstance(op, AddTask):
            working._add_task(op.spec)
            summary.added_tasks += 1
        elif isinstance(op, RemoveTask):
            working._remove_task(op.task_id)
            summary.removed_tasks += 1
        elif isinstance(op, UpdateTask):
            working._update_task(op.task_id, op.patch)
            summary.modified_tasks += 1
        elif isinstance(op, AddDependency):
            working._add_dependency(op.spec)
            summary.added_dependencies += 1
        elif isinstance(op, RemoveDependency):
            working._remove_dependency(op.edge_id)
            summary.removed_dependencies += 1
        elif isinstance(op, UpdateDependency):
            working._update_dependency(op.edge_id, op.patch)
            summary.modified_dependencies += 1
        elif isinstance(op, BuildConstellation):
            rebuilt = build_constellation(op.config, clear=op.clear, base=working)
            rebuilt.version = working.version  # the delta commit bumps once
            summary.added_tasks += len(op.config.get("tasks", []))
            summary.added_dependencies += len(op.config.get("dependencies", []))
            working = rebuilt
        else:
            raise ParseError(f"unknown edit op {op!r}")
    violations = working.validate()
    violations.extend(edit_locality_violations(constellation, working))
    if violations:
        raise ValidationFailed(violations)
    working.version = constellation.version + 1
    return working, summary


def edit_locality_violations(
    pre: TaskConstellation, post: TaskConstellation
) -> List[Violation]:
    """Diff-based check that no edit touched a non-PENDING task.

    Non-PENDING tasks must keep their fields, status, result and incoming
    edge set bit-identical across the edit. Outgoing edges of terminal tasks
    may be rewired, since only the (PENDING) downstream endpoint's inputs
    change.
    """
    from .serial import edge_to_doc, task_to_doc

    violations: List[Violation] = []
    for task_id, task in sorted(pre.tasks.items()):
        if task.status is TaskStatus.PENDING:
            continue
        if task_id not in post.tasks:
            violations.append(
                Violation("ImmutableTask", f"non-PENDING task {task_id!r} was removed")
            )
            continue
        if task_to_doc(task, pre) != task_to_doc(post.tasks[task_id], post):
            violations.append(
                Violation("ImmutableTask", f"non-PENDING task {task_id!r} was modified")
            )
            continue
        pre_in = [edge_to_doc(e) for e in pre.incoming(task_id)]
        post_in = [edge_to_doc(e) for e in post.incoming(task_id)]
        if pre_in != post_in:
            violations.append(
                Violation(
                    "ImmutableTask",
                    f"incoming edges of non-PENDING task {task_id!r} changed",
                )
            )
    return violations


# -- document form (script files) ---------------------------------------

_OP_PARSERS = {
    "add_task": lambda d: AddTask(d["spec"]),
    "remove_task": lambda d: RemoveTask(d["task_id"]),
    "update_task": lambda d: UpdateTask(d["task_id"], d["patch"]),
    "add_dependency": lambda d: AddDependency(d["spec"]),
    "remove_dependency": lambda d: RemoveDependency(d["edge_id"]),
    "update_dependency": lambda d: UpdateDependency(d["edge_id"], d["patch"]),
    "build_constellation": lambda d: BuildConstellation(d["config"], d.get("clear", True)),
}


def op_from_doc(doc: Dict[str, Any]) -> EditOp:
    try:
        name = doc["op"]
        parser = _OP_PARSERS[name]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad edit op document: {doc!r}") from exc
    try:
        return parser(doc)
    except KeyError as exc:
        raise ParseError(f"edit op {name!r} missing field {exc}") from exc


def delta_from_doc(docs: List[Dict[str, Any]], provenance: str = "") -> EditDelta:
    return EditDelta([op_from_doc(d) for d in docs], provenance=provenance)

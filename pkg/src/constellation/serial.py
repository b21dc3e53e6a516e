"""Canonical JSON document format for constellations.

The layout is fixed (top-level keys, arrays sorted by id, UPPER_SNAKE_CASE
enums) so serialized documents are stable and diff-friendly; the matching
JSON Schema ships under ``schemas/constellation.schema.json``.
"""

from __future__ import annotations

import json
from typing import Any, Dict

from .errors import ParseError, ValidationFailed
from .model import (
    DependencyKind,
    DependencyType,
    FailureReason,
    TaskConstellation,
    TaskStar,
    TaskStarLine,
    TaskStatus,
    Violation,
)

SCHEMA_VERSION = 1


def task_to_doc(task: TaskStar, constellation: TaskConstellation) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "id": task.id,
        "name": task.name,
        "description": task.description,
        "device": task.device,
        "tips": list(task.tips),
        "status": task.status.value,
        "dependencies": constellation.dependencies_of(task.id),
    }
    if task.result is not None:
        doc["result"] = task.result
    if task.failure_reason is not None:
        doc["failure_reason"] = task.failure_reason.value
    return doc


def edge_to_doc(edge: TaskStarLine) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "id": edge.id,
        "from_task": edge.from_task,
        "to_task": edge.to_task,
        "dep_type": edge.dep_type.kind.value,
        "description": edge.description,
    }
    if edge.dep_type.condition_id is not None:
        doc["condition_id"] = edge.dep_type.condition_id
    return doc


def to_document(constellation: TaskConstellation) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "request": constellation.request,
        "version": constellation.version,
        "tasks": [
            task_to_doc(constellation.tasks[tid], constellation)
            for tid in sorted(constellation.tasks)
        ],
        "dependencies": [edge_to_doc(constellation.edges[eid]) for eid in sorted(constellation.edges)],
    }


def serialize(constellation: TaskConstellation) -> str:
    return json.dumps(to_document(constellation), indent=2, ensure_ascii=False) + "\n"


def from_document(doc: Dict[str, Any]) -> TaskConstellation:
    if not isinstance(doc, dict):
        raise ParseError("constellation document must be a JSON object")
    constellation = TaskConstellation(doc.get("request", ""))
    violations = []
    for task_doc in doc.get("tasks", []):
        try:
            task = _task_from_doc(task_doc)
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad task entry: {exc}") from exc
        if task.id in constellation.tasks:
            violations.append(Violation("DuplicateId", f"task id {task.id!r} appears twice"))
            continue
        constellation.tasks[task.id] = task
    for edge_doc in doc.get("dependencies", []):
        try:
            edge = _edge_from_doc(edge_doc)
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad dependency entry: {exc}") from exc
        if edge.id in constellation.edges:
            violations.append(Violation("DuplicateId", f"dependency id {edge.id!r} appears twice"))
            continue
        constellation.edges[edge.id] = edge
    constellation.version = int(doc.get("version", 0))
    violations.extend(constellation.validate())
    if violations:
        raise ValidationFailed(violations)
    return constellation


def deserialize(text: str) -> TaskConstellation:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return from_document(doc)


def _task_from_doc(doc: Dict[str, Any]) -> TaskStar:
    task = TaskStar(
        id=doc["id"],
        name=doc.get("name", doc["id"]),
        description=doc.get("description", ""),
        device=doc.get("device", ""),
        tips=list(doc.get("tips", [])),
        status=TaskStatus(doc.get("status", "PENDING")),
        result=doc.get("result"),
    )
    if doc.get("failure_reason") is not None:
        task.failure_reason = FailureReason(doc["failure_reason"])
    return task


def _edge_from_doc(doc: Dict[str, Any]) -> TaskStarLine:
    kind = DependencyKind(doc.get("dep_type", "UNCONDITIONAL"))
    dep_type = DependencyType(kind, doc.get("condition_id"))
    return TaskStarLine(
        id=doc["id"],
        from_task=doc["from_task"],
        to_task=doc["to_task"],
        dep_type=dep_type,
        description=doc.get("description", ""),
    )

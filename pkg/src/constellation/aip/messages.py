"""Typed message vocabulary of the agent-interaction protocol.

Nine message types with per-type schema validation and a length-prefixed
UTF-8 JSON wire encoding. ``decode(encode(m)) == m`` for every valid
message; anything failing its schema is rejected before processing.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

from ..errors import SchemaViolation


class MessageType(Enum):
    REGISTER = "REGISTER"
    TASK = "TASK"
    COMMAND = "COMMAND"
    COMMAND_RESULTS = "COMMAND_RESULTS"
    TASK_END = "TASK_END"
    HEARTBEAT = "HEARTBEAT"
    DEVICE_INFO_REQUEST = "DEVICE_INFO_REQUEST"
    DEVICE_INFO_RESPONSE = "DEVICE_INFO_RESPONSE"
    ERROR = "ERROR"


class Direction(Enum):
    CLIENT_TO_SERVER = "CLIENT_TO_SERVER"
    SERVER_TO_CLIENT = "SERVER_TO_CLIENT"
    BIDIRECTIONAL = "BIDIRECTIONAL"


class IdempotencyClass(Enum):
    IDEMPOTENT = "IDEMPOTENT"
    LIMITED = "LIMITED"
    NON_IDEMPOTENT = "NON_IDEMPOTENT"


DIRECTIONS: Dict[MessageType, Direction] = {
    MessageType.REGISTER: Direction.CLIENT_TO_SERVER,
    MessageType.TASK: Direction.SERVER_TO_CLIENT,
    MessageType.COMMAND: Direction.SERVER_TO_CLIENT,
    MessageType.COMMAND_RESULTS: Direction.CLIENT_TO_SERVER,
    MessageType.TASK_END: Direction.CLIENT_TO_SERVER,
    MessageType.HEARTBEAT: Direction.BIDIRECTIONAL,
    MessageType.DEVICE_INFO_REQUEST: Direction.SERVER_TO_CLIENT,
    MessageType.DEVICE_INFO_RESPONSE: Direction.CLIENT_TO_SERVER,
    MessageType.ERROR: Direction.BIDIRECTIONAL,
}

# Duplicate delivery of an IDEMPOTENT message converges to the same state.
# TASK is LIMITED: a duplicate for an already-active (session, task) pair is
# acknowledged but not re-executed. COMMAND must never be replayed.
IDEMPOTENCY: Dict[MessageType, IdempotencyClass] = {
    MessageType.REGISTER: IdempotencyClass.IDEMPOTENT,
    MessageType.TASK: IdempotencyClass.LIMITED,
    MessageType.COMMAND: IdempotencyClass.NON_IDEMPOTENT,
    MessageType.COMMAND_RESULTS: IdempotencyClass.IDEMPOTENT,
    MessageType.TASK_END: IdempotencyClass.IDEMPOTENT,
    MessageType.HEARTBEAT: IdempotencyClass.IDEMPOTENT,
    MessageType.DEVICE_INFO_REQUEST: IdempotencyClass.IDEMPOTENT,
    MessageType.DEVICE_INFO_RESPONSE: IdempotencyClass.IDEMPOTENT,
    MessageType.ERROR: IdempotencyClass.IDEMPOTENT,
}

# Required body fields (name -> expected python type) per message type.
_BODY_SCHEMAS: Dict[MessageType, Dict[str, type]] = {
    MessageType.REGISTER: {"client_id": str, "metadata": dict},
    MessageType.TASK: {"task": dict, "request": str},
    MessageType.COMMAND: {"actions": list, "response_id": str},
    MessageType.COMMAND_RESULTS: {"action_results": list, "prev_response_id": str},
    MessageType.TASK_END: {"status": str},
    MessageType.HEARTBEAT: {"timestamp": (int, float)},  # type: ignore[dict-item]
    MessageType.DEVICE_INFO_REQUEST: {"target_id": str, "request_id": str},
    MessageType.DEVICE_INFO_RESPONSE: {"result": dict, "response_id": str},
    MessageType.ERROR: {"error": str, "context": dict},
}

_TASK_END_STATUSES = ("COMPLETED", "FAILED")


@dataclass(frozen=True)
class AipMessage:
    msg_type: MessageType
    body: Dict[str, Any] = field(default_factory=dict)
    session_id: Optional[str] = None

    @property
    def direction(self) -> Direction:
        return DIRECTIONS[self.msg_type]

    @property
    def idempotency(self) -> IdempotencyClass:
        return IDEMPOTENCY[self.msg_type]


def validate(msg: AipMessage) -> None:
    schema = _BODY_SCHEMAS.get(msg.msg_type)
    if schema is None:
        raise SchemaViolation("msg_type", f"unknown message type {msg.msg_type!r}")
    for name, expected in schema.items():
        if name not in msg.body:
            raise SchemaViolation(name, f"required by {msg.msg_type.value}")
        if not isinstance(msg.body[name], expected):
            raise SchemaViolation(
                name, f"expected {expected}, got {type(msg.body[name]).__name__}"
            )
        if expected is str and not msg.body[name]:
            raise SchemaViolation(name, "must be non-empty")
    if msg.msg_type is MessageType.TASK_END:
        if msg.body["status"] not in _TASK_END_STATUSES:
            raise SchemaViolation("status", f"must be one of {_TASK_END_STATUSES}")
        if msg.body["status"] == "COMPLETED" and "result" not in msg.body:
            raise SchemaViolation("result", "required for COMPLETED TASK_END")
        if msg.body["status"] == "FAILED" and "error" not in msg.body:
            raise SchemaViolation("error", "required for FAILED TASK_END")
    if msg.msg_type is MessageType.REGISTER and not msg.body["client_id"].strip():
        raise SchemaViolation("client_id", "must be non-empty")


def encode(msg: AipMessage) -> bytes:
    validate(msg)
    doc: Dict[str, Any] = {"msg_type": msg.msg_type.value, "body": msg.body}
    if msg.session_id is not None:
        doc["session_id"] = msg.session_id
    payload = json.dumps(doc, ensure_ascii=False, sort_keys=True).encode("utf-8")
    return struct.pack(">I", len(payload)) + payload


def decode(frame: bytes) -> AipMessage:
    if len(frame) < 4:
        raise SchemaViolation("frame", "shorter than the length prefix")
    (length,) = struct.unpack(">I", frame[:4])
    payload = frame[4:]
    if len(payload) != length:
        raise SchemaViolation("frame", f"length prefix {length} != payload {len(payload)}")
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation("frame", f"invalid JSON payload: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation("frame", "payload must be a JSON object")
    try:
        msg_type = MessageType(doc["msg_type"])
    except (KeyError, ValueError) as exc:
        raise SchemaViolation("msg_type", f"unknown or missing: {exc}") from exc
    body = doc.get("body")
    if not isinstance(body, dict):
        raise SchemaViolation("body", "must be a JSON object")
    msg = AipMessage(msg_type=msg_type, body=body, session_id=doc.get("session_id"))
    validate(msg)
    return msg

"""Length-prefixed JSON fleet protocol.

Each frame is a 4-byte big-endian length followed by a UTF-8 JSON object
with keys in the fixed order {type, robot_id, seq, t_ms, payload}. The
same JSON objects (without the length prefix) travel over the console
WebSocket, one per text frame.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

MAX_FRAME_BYTES = 1024 * 1024
HEADER_BYTES = 4
UINT64_MAX = 2 ** 64 - 1

MSG_HELLO = "HELLO"
MSG_MAP_REQ = "MAP_REQ"
MSG_MAP = "MAP"
MSG_POSE = "POSE"
MSG_VLP_FIX = "VLP_FIX"
MSG_GOAL = "GOAL"
MSG_GOAL_STATUS = "GOAL_STATUS"
MSG_METRIC = "METRIC"
MSG_ERROR = "ERROR"

_NUM = (int, float)

# Required payload fields per message type: name -> allowed JSON types.
PAYLOAD_SCHEMAS: dict[str, dict[str, tuple[type, ...]]] = {
    MSG_HELLO: {},
    MSG_MAP_REQ: {},
    MSG_MAP: {
        "resolution_m": _NUM, "origin_x_m": _NUM, "origin_y_m": _NUM,
        "width": (int,), "height": (int,), "rows": (list,),
        "beacons": (list,), "coverage_radius_m": _NUM,
    },
    MSG_POSE: {
        "x": _NUM, "y": _NUM, "theta": _NUM, "cov": (list,),
        "in_coverage": (bool,),
    },
    MSG_VLP_FIX: {
        "x": _NUM, "y": _NUM, "sigma": _NUM, "led_id": (int,), "quality": _NUM,
    },
    MSG_GOAL: {"x": _NUM, "y": _NUM},
    MSG_GOAL_STATUS: {"status": (str,)},
    MSG_METRIC: {"name": (str,), "value": _NUM},
    MSG_ERROR: {"code": (str,), "detail": (str,)},
}

MESSAGE_TYPES = frozenset(PAYLOAD_SCHEMAS)


class WireError(ValueError):
    """Base class for protocol faults; all are non-fatal to the peer."""


class PayloadTooLarge(WireError):
    pass


class TruncatedFrame(WireError):
    """Frame incomplete: wait for more bytes."""


class MalformedJson(WireError):
    pass


class UnknownType(WireError):
    pass


class SchemaViolation(WireError):
    pass


@dataclass(frozen=True)
class WireMessage:
    type: str
    robot_id: str
    seq: int
    t_ms: int
    payload: dict = field(default_factory=dict)


def _validate(msg: WireMessage) -> None:
    if msg.type not in MESSAGE_TYPES:
        raise UnknownType(f"unknown message type {msg.type!r}")
    if not isinstance(msg.robot_id, str):
        raise SchemaViolation("robot_id must be a string")
    for name, value in (("seq", msg.seq), ("t_ms", msg.t_ms)):
        if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= UINT64_MAX:
            raise SchemaViolation(f"{name} must be an unsigned 64-bit integer")
    if not isinstance(msg.payload, dict):
        raise SchemaViolation("payload must be an object")
    schema = PAYLOAD_SCHEMAS[msg.type]
    for key, types in schema.items():
        if key not in msg.payload:
            raise SchemaViolation(f"{msg.type} payload missing {key!r}")
        value = msg.payload[key]
        if isinstance(value, bool) and bool not in types:
            raise SchemaViolation(f"{msg.type} payload field {key!r} has wrong type")
        if not isinstance(value, tuple(types)):
            raise SchemaViolation(f"{msg.type} payload field {key!r} has wrong type")


def encode_message(msg: WireMessage) -> bytes:
    """Serialize to a length-prefixed JSON frame with fixed key order."""
    _validate(msg)
    body = json.dumps(
        {"type": msg.type, "robot_id": msg.robot_id, "seq": msg.seq,
         "t_ms": msg.t_ms, "payload": msg.payload},
        separators=(",", ":"),
    ).encode("utf-8")
    if len(body) > MAX_FRAME_BYTES:
        raise PayloadTooLarge(f"{len(body)} bytes exceeds {MAX_FRAME_BYTES}")
    return struct.pack(">I", len(body)) + body


def decode_body(body: bytes) -> WireMessage:
    """Parse and validate one JSON frame body (no length prefix)."""
    try:
        raw = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise MalformedJson(str(err)) from err
    if not isinstance(raw, dict):
        raise MalformedJson("frame is not a JSON object")
    for key in ("type", "robot_id", "seq", "t_ms", "payload"):
        if key not in raw:
            raise SchemaViolation(f"frame missing {key!r}")
    if not isinstance(raw["type"], str):
        raise SchemaViolation("type must be a string")
    if raw["type"] not in MESSAGE_TYPES:
        raise UnknownType(f"unknown message type {raw['type']!r}")
    msg = WireMessage(type=raw["type"], robot_id=raw["robot_id"], seq=raw["seq"],
                      t_ms=raw["t_ms"], payload=raw["payload"])
    _validate(msg)
    return msg


def decode_message(data: bytes) -> WireMessage:
    """Decode one frame from the start of `data` (prefix + body)."""
    if len(data) < HEADER_BYTES:
        raise TruncatedFrame(f"{len(data)} bytes, need {HEADER_BYTES} for the prefix")
    (length,) = struct.unpack(">I", data[:HEADER_BYTES])
    if length > MAX_FRAME_BYTES:
        raise PayloadTooLarge(f"prefix {length} exceeds {MAX_FRAME_BYTES}")
    if len(data) < HEADER_BYTES + length:
        raise TruncatedFrame(f"prefix {length}, only {len(data) - HEADER_BYTES} body bytes")
    return decode_body(data[HEADER_BYTES : HEADER_BYTES + length])


class FrameAssembler:
    """Reassembles frames from an arbitrary byte-chunk stream."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        """Append bytes; return the bodies of every now-complete frame."""
        self._buf.extend(data)
        bodies = []
        while True:
            if len(self._buf) < HEADER_BYTES:
                break
            (length,) = struct.unpack(">I", bytes(self._buf[:HEADER_BYTES]))
            if length > MAX_FRAME_BYTES:
                raise PayloadTooLarge(f"prefix {length} exceeds {MAX_FRAME_BYTES}")
            if len(self._buf) < HEADER_BYTES + length:
                break
            bodies.append(bytes(self._buf[HEADER_BYTES : HEADER_BYTES + length]))
            del self._buf[: HEADER_BYTES + length]
        return bodies

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)

"""Bit-exact binary command/telemetry protocol.

Frame layout (all multi-byte fields big-endian)::

    offset  size  field
    0       2     magic 0x44 0x57
    2       1     version (0x01)
    3       1     msg_type
    4       2     seq (unsigned)
    6       2     payload length (<= 1024)
    8       n     payload
    8+n     4     CRC-32 (IEEE polynomial) over bytes 0 .. 8+n-1

The decoder accepts arbitrary byte streams: it resynchronizes on the
magic, drops CRC-failing frames (advancing past the magic and counting
the corruption), keeps partial trailing frames for the next feed, and
never raises on garbage input.  Unknown message types and field-range
violations surface as typed placeholder messages so the session layer
can NACK them instead of disconnecting.

The full field-by-field wire reference lives in ``docs/protocol.md``.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

from .errors import ProtocolError

MAGIC = b"\x44\x57"
VERSION = 0x01
MAX_PAYLOAD = 1024
HEADER_LEN = 8
CRC_LEN = 4

# Command message types.
MSG_DRIVE = 0x01
MSG_MODE = 0x02
MSG_TOOL_SELECT = 0x03
MSG_TOOL_MOVE = 0x04
MSG_INJECT = 0x05
MSG_SPATULA = 0x06
MSG_CLEAN = 0x07
MSG_CARTRIDGE_LOAD = 0x08
MSG_LOCK = 0x0D
MSG_ESTOP = 0x0E
MSG_HEARTBEAT = 0x0F

# Telemetry message types.
MSG_STATE = 0x80
MSG_JOINT_MAP = 0x81
MSG_EVENT = 0x82
MSG_ACK = 0x83

#: TOOL_SELECT kind byte requesting a stow (retract tool + arm).
TOOL_STOW = 0xFF

# ACK/NACK status codes (0 = ACK).
NACK_LOCKED = 1
NACK_INTERLOCK = 2
NACK_RANGE = 3
NACK_UNKNOWN_TYPE = 4
NACK_BAD_LENGTH = 5
NACK_GATE_NOT_MET = 6
NACK_CARTRIDGE_EMPTY = 7
NACK_WORKSPACE = 8
NACK_BAD_STATE = 9

# NACK detail sub-codes.
DETAIL_NONE = 0
DETAIL_NOT_STANDSTILL = 1
DETAIL_TOOL_DEPLOYED = 2
DETAIL_ARM_NOT_DEPLOYED = 3
DETAIL_NO_JOINT = 4
DETAIL_UNREACHABLE = 5
DETAIL_NOT_IN_GROOVE = 6
DETAIL_BUSY = 7
DETAIL_COVERAGE = 8
DETAIL_WRONG_TOOL = 9
DETAIL_VIBRATION = 10
DETAIL_FAULTED = 11
DETAIL_BAD_STATE = 12

#: Sensor field sentinel meaning "no joint ahead".
SENSOR_NO_JOINT = 0x7FFFFFFF


def _check_len(payload: bytes, expected: int) -> None:
    if len(payload) != expected:
        raise ProtocolError(
            f"payload length {len(payload)}, expected {expected}", NACK_BAD_LENGTH
        )


def _check_range(value: int, lo: int, hi: int, name: str) -> None:
    if not lo <= value <= hi:
        raise ProtocolError(f"{name} {value} out of [{lo},{hi}]", NACK_RANGE)


@dataclass(frozen=True)
class Drive:
    """Wheel speed command, signed mm/s."""

    v_left_mm_s: int
    v_right_mm_s: int

    MSG_TYPE = MSG_DRIVE

    def encode_payload(self) -> bytes:
        _check_range(self.v_left_mm_s, -32768, 32767, "v_left")
        _check_range(self.v_right_mm_s, -32768, 32767, "v_right")
        return struct.pack(">hh", self.v_left_mm_s, self.v_right_mm_s)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "Drive":
        _check_len(payload, 4)
        vl, vr = struct.unpack(">hh", payload)
        return cls(vl, vr)


@dataclass(frozen=True)
class ModeCommand:
    """Wall-press mode request: extend (1) or compress (0)."""

    extend: bool

    MSG_TYPE = MSG_MODE

    def encode_payload(self) -> bytes:
        return struct.pack(">B", 1 if self.extend else 0)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "ModeCommand":
        _check_len(payload, 1)
        _check_range(payload[0], 0, 1, "mode")
        return cls(extend=payload[0] == 1)


@dataclass(frozen=True)
class ToolSelect:
    """End-effector selection; kind 0xFF requests a stow."""

    kind: int

    MSG_TYPE = MSG_TOOL_SELECT

    def encode_payload(self) -> bytes:
        _check_range(self.kind, 0, 255, "kind")
        return struct.pack(">B", self.kind)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "ToolSelect":
        _check_len(payload, 1)
        return cls(kind=payload[0])


@dataclass(frozen=True)
class ToolMove:
    """Tool target: r mm, theta centidegrees (0-35999), z mm."""

    r_mm: int
    theta_centideg: int
    z_mm: int

    MSG_TYPE = MSG_TOOL_MOVE

    def encode_payload(self) -> bytes:
        _check_range(self.r_mm, 0, 65535, "r")
        _check_range(self.theta_centideg, 0, 35999, "theta")
        _check_range(self.z_mm, -32768, 32767, "z")
        return struct.pack(">HHh", self.r_mm, self.theta_centideg, self.z_mm)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "ToolMove":
        _check_len(payload, 6)
        r, theta, z = struct.unpack(">HHh", payload)
        _check_range(theta, 0, 35999, "theta")
        return cls(r, theta, z)


@dataclass(frozen=True)
class Inject:
    """Sealant piston start/stop."""

    start: bool

    MSG_TYPE = MSG_INJECT

    def encode_payload(self) -> bytes:
        return struct.pack(">B", 1 if self.start else 0)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "Inject":
        _check_len(payload, 1)
        _check_range(payload[0], 0, 1, "inject")
        return cls(start=payload[0] == 1)


@dataclass(frozen=True)
class Spatula:
    """Run the spatula finishing pass over the active joint."""

    MSG_TYPE = MSG_SPATULA

    def encode_payload(self) -> bytes:
        return b""

    @classmethod
    def decode_payload(cls, payload: bytes) -> "Spatula":
        _check_len(payload, 0)
        return cls()


@dataclass(frozen=True)
class Clean:
    """Brush passes: count plus brush kind (0 straight, 1 tapered)."""

    passes: int
    brush: int

    MSG_TYPE = MSG_CLEAN

    def encode_payload(self) -> bytes:
        _check_range(self.passes, 0, 255, "passes")
        _check_range(self.brush, 0, 255, "brush")
        return struct.pack(">BB", self.passes, self.brush)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "Clean":
        _check_len(payload, 2)
        return cls(passes=payload[0], brush=payload[1])


@dataclass(frozen=True)
class CartridgeLoad:
    """Load a fresh, full sealant cartridge."""

    MSG_TYPE = MSG_CARTRIDGE_LOAD

    def encode_payload(self) -> bytes:
        return b""

    @classmethod
    def decode_payload(cls, payload: bytes) -> "CartridgeLoad":
        _check_len(payload, 0)
        return cls()


@dataclass(frozen=True)
class Lock:
    """Operator-lock request: acquire (1) or release (0)."""

    acquire: bool

    MSG_TYPE = MSG_LOCK

    def encode_payload(self) -> bytes:
        return struct.pack(">B", 1 if self.acquire else 0)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "Lock":
        _check_len(payload, 1)
        _check_range(payload[0], 0, 1, "lock")
        return cls(acquire=payload[0] == 1)


@dataclass(frozen=True)
class Estop:
    """Emergency stop; honored from any session regardless of lock."""

    MSG_TYPE = MSG_ESTOP

    def encode_payload(self) -> bytes:
        return b""

    @classmethod
    def decode_payload(cls, payload: bytes) -> "Estop":
        _check_len(payload, 0)
        return cls()


@dataclass(frozen=True)
class Heartbeat:
    """Session liveness ping; always ACKed."""

    MSG_TYPE = MSG_HEARTBEAT

    def encode_payload(self) -> bytes:
        return b""

    @classmethod
    def decode_payload(cls, payload: bytes) -> "Heartbeat":
        _check_len(payload, 0)
        return cls()


@dataclass(frozen=True)
class StateTelemetry:
    """Per-tick robot state snapshot with documented fixed-point scales.

    Scales: axial 0.1 mm, lateral 0.01 mm, yaw 0.1 mrad, leg extension
    0.1 mm, leg force 0.1 N, tool r/z 0.1 mm, tool theta centidegrees,
    cartridge whole mm^3, sensor 0.01 mm (:data:`SENSOR_NO_JOINT` when
    no joint lies ahead).  Flag bits: 0 arm deployed, 1 operator lock
    taken, 2 tool busy, 3 autopilot active.
    """

    tick: int
    axial_01mm: int
    lateral_001mm: int
    yaw_01mrad: int
    mode: int
    mission: int
    tool_kind: int  # 0xFF = none selected
    flags: int
    legs: tuple  # six (extension_01mm, force_01n) pairs
    tool_r_01mm: int
    tool_theta_centideg: int
    tool_z_01mm: int
    cartridge_mm3: int
    sensor_001mm: int

    MSG_TYPE = MSG_STATE

    def encode_payload(self) -> bytes:
        if len(self.legs) != 6:
            raise ProtocolError("state needs exactly 6 legs", NACK_RANGE)
        parts = [
            struct.pack(
                ">IIhhBBBB",
                self.tick & 0xFFFFFFFF,
                self.axial_01mm,
                self.lateral_001mm,
                self.yaw_01mrad,
                self.mode,
                self.mission,
                self.tool_kind,
                self.flags,
            )
        ]
        for ext, force in self.legs:
            parts.append(struct.pack(">HH", ext, force))
        parts.append(
            struct.pack(
                ">HHhIi",
                self.tool_r_01mm,
                self.tool_theta_centideg,
                self.tool_z_01mm,
                self.cartridge_mm3,
                self.sensor_001mm,
            )
        )
        return b"".join(parts)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "StateTelemetry":
        _check_len(payload, 54)
        head = struct.unpack(">IIhhBBBB", payload[:16])
        legs = tuple(
            struct.unpack(">HH", payload[16 + 4 * i : 20 + 4 * i]) for i in range(6)
        )
        tail = struct.unpack(">HHhIi", payload[40:54])
        return cls(*head, legs, *tail)


@dataclass(frozen=True)
class JointMap:
    """Sector maps of one joint, levels quantized to 0-255."""

    joint_index: int
    corrosion: bytes
    coverage: bytes

    MSG_TYPE = MSG_JOINT_MAP

    def encode_payload(self) -> bytes:
        if len(self.corrosion) != len(self.coverage):
            raise ProtocolError("sector maps must have equal length", NACK_RANGE)
        _check_range(self.joint_index, 0, 65535, "joint_index")
        return (
            struct.pack(">HH", self.joint_index, len(self.corrosion))
            + self.corrosion
            + self.coverage
        )

    @classmethod
    def decode_payload(cls, payload: bytes) -> "JointMap":
        if len(payload) < 4:
            raise ProtocolError("joint map too short", NACK_BAD_LENGTH)
        idx, n = struct.unpack(">HH", payload[:4])
        _check_len(payload, 4 + 2 * n)
        return cls(idx, payload[4 : 4 + n], payload[4 + n : 4 + 2 * n])


@dataclass(frozen=True)
class Event:
    """Asynchronous simulator event: code plus signed detail."""

    code: int
    detail: int

    MSG_TYPE = MSG_EVENT

    def encode_payload(self) -> bytes:
        _check_range(self.code, 0, 255, "code")
        _check_range(self.detail, -(2**31), 2**31 - 1, "detail")
        return struct.pack(">Bi", self.code, self.detail)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "Event":
        _check_len(payload, 5)
        code, detail = struct.unpack(">Bi", payload)
        return cls(code, detail)


@dataclass(frozen=True)
class AckNack:
    """Command response: echoed seq, status (0 = ACK), detail sub-code."""

    ack_seq: int
    status: int
    detail: int = 0

    MSG_TYPE = MSG_ACK

    def encode_payload(self) -> bytes:
        _check_range(self.ack_seq, 0, 65535, "ack_seq")
        _check_range(self.status, 0, 255, "status")
        _check_range(self.detail, 0, 255, "detail")
        return struct.pack(">HBB", self.ack_seq, self.status, self.detail)

    @classmethod
    def decode_payload(cls, payload: bytes) -> "AckNack":
        _check_len(payload, 4)
        seq, status, detail = struct.unpack(">HBB", payload)
        return cls(seq, status, detail)


@dataclass(frozen=True)
class UnknownMessage:
    """CRC-valid frame whose msg_type is not in the registry."""

    msg_type: int


@dataclass(frozen=True)
class MalformedMessage:
    """CRC-valid frame of a known type with a bad payload."""

    msg_type: int
    status: int  # NACK_BAD_LENGTH or NACK_RANGE


MESSAGE_TYPES = {
    cls.MSG_TYPE: cls
    for cls in (
        Drive,
        ModeCommand,
        ToolSelect,
        ToolMove,
        Inject,
        Spatula,
        Clean,
        CartridgeLoad,
        Lock,
        Estop,
        Heartbeat,
        StateTelemetry,
        JointMap,
        Event,
        AckNack,
    )
}

COMMAND_TYPES = (
    Drive,
    ModeCommand,
    ToolSelect,
    ToolMove,
    Inject,
    Spatula,
    Clean,
    CartridgeLoad,
    Lock,
    Estop,
    Heartbeat,
)


def encode(message, seq: int) -> bytes:
    """Encode a message into one complete frame.

    Args:
        message: Any message dataclass from this module.
        seq: Frame sequence number, 0-65535.

    Returns:
        The exact wire bytes (header + payload + CRC-32).

    Raises:
        ProtocolError: a field is out of its documented range.
    """
    if not 0 <= seq <= 0xFFFF:
        raise ProtocolError(f"seq {seq} out of [0,65535]", NACK_RANGE)
    payload = message.encode_payload()
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload {len(payload)} exceeds {MAX_PAYLOAD}", NACK_RANGE)
    body = MAGIC + struct.pack(
        ">BBHH", VERSION, message.MSG_TYPE, seq, len(payload)
    ) + payload
    crc = zlib.crc32(body) & 0xFFFFFFFF
    return body + struct.pack(">I", crc)


@dataclass(frozen=True)
class DecodedFrame:
    """One frame recovered from the stream: its seq and decoded message."""

    seq: int
    msg: object


class Decoder:
    """Incremental frame decoder over an arbitrary byte stream.

    Feed it chunks as they arrive; it returns the complete frames found,
    retains partial trailing data, resynchronizes on the magic after
    corruption, and counts what it drops.

    Attributes:
        crc_mismatches: frames dropped due to CRC failure.
        resyncs: times the scanner skipped bytes to find a magic.
    """

    def __init__(self) -> None:
        self._buf = b""
        self.crc_mismatches = 0
        self.resyncs = 0

    def feed(self, data: bytes) -> list[DecodedFrame]:
        self._buf += data
        out: list[DecodedFrame] = []
        buf = self._buf
        while True:
            idx = buf.find(MAGIC)
            if idx < 0:
                if buf:
                    self.resyncs += 1
                # A lone trailing 0x44 could be the start of the next magic.
                buf = buf[-1:] if buf.endswith(MAGIC[:1]) else b""
                break
            if idx > 0:
                self.resyncs += 1
                buf = buf[idx:]
            if len(buf) < HEADER_LEN:
                break
            version = buf[2]
            seq, length = struct.unpack(">HH", buf[4:8])
            if version != VERSION or length > MAX_PAYLOAD:
                self.resyncs += 1
                buf = buf[2:]
                continue
            total = HEADER_LEN + length + CRC_LEN
            if len(buf) < total:
                break
            body = buf[: HEADER_LEN + length]
            (crc,) = struct.unpack(">I", buf[HEADER_LEN + length : total])
            if zlib.crc32(body) & 0xFFFFFFFF != crc:
                self.crc_mismatches += 1
                buf = buf[2:]
                continue
            buf = buf[total:]
            msg_type = body[3]
            payload = body[HEADER_LEN:]
            cls = MESSAGE_TYPES.get(msg_type)
            if cls is None:
                out.append(DecodedFrame(seq, UnknownMessage(msg_type)))
                continue
            try:
                msg = cls.decode_payload(payload)
            except ProtocolError as exc:
                out.append(DecodedFrame(seq, MalformedMessage(msg_type, exc.code)))
                continue
            out.append(DecodedFrame(seq, msg))
        self._buf = buf
        return out

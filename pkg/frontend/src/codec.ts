/**
 * Binary frame codec for the teleoperation bridge socket.
 *
 * Frame layout (all multi-byte fields big-endian):
 *
 *     offset  size  field
 *     0       2     magic 0x44 0x57
 *     2       1     version (0x01)
 *     3       1     msg_type
 *     4       2     seq (unsigned)
 *     6       2     payload length (<= 1024)
 *     8       n     payload
 *     8+n     4     CRC-32 (IEEE polynomial) over bytes 0 .. 8+n-1
 *
 * The bridge carries exactly one frame per socket message, but the
 * decoder still accepts arbitrary byte streams: it resynchronizes on
 * the magic, drops CRC-failing frames (counting them), keeps partial
 * trailing data for the next feed, and never throws on garbage input.
 */

export const MAGIC0 = 0x44;
export const MAGIC1 = 0x57;
export const VERSION = 0x01;
export const MAX_PAYLOAD = 1024;
export const HEADER_LEN = 8;
export const CRC_LEN = 4;

// Command message types.
export const MSG_DRIVE = 0x01;
export const MSG_MODE = 0x02;
export const MSG_TOOL_SELECT = 0x03;
export const MSG_TOOL_MOVE = 0x04;
export const MSG_INJECT = 0x05;
export const MSG_SPATULA = 0x06;
export const MSG_CLEAN = 0x07;
export const MSG_CARTRIDGE_LOAD = 0x08;
export const MSG_LOCK = 0x0d;
export const MSG_ESTOP = 0x0e;
export const MSG_HEARTBEAT = 0x0f;

// Telemetry message types.
export const MSG_STATE = 0x80;
export const MSG_JOINT_MAP = 0x81;
export const MSG_EVENT = 0x82;
export const MSG_ACK = 0x83;

/** TOOL_SELECT kind byte requesting a stow (retract tool + arm). */
export const TOOL_STOW = 0xff;

// ACK/NACK status codes (0 = ACK).
export const ACK = 0;
export const NACK_LOCKED = 1;
export const NACK_INTERLOCK = 2;
export const NACK_RANGE = 3;
export const NACK_UNKNOWN_TYPE = 4;
export const NACK_BAD_LENGTH = 5;
export const NACK_GATE_NOT_MET = 6;
export const NACK_CARTRIDGE_EMPTY = 7;
export const NACK_WORKSPACE = 8;
export const NACK_BAD_STATE = 9;

export const STATUS_NAMES: readonly string[] = [
  "ACK",
  "LOCKED",
  "INTERLOCK",
  "RANGE",
  "UNKNOWN_TYPE",
  "BAD_LENGTH",
  "GATE_NOT_MET",
  "CARTRIDGE_EMPTY",
  "WORKSPACE",
  "BAD_STATE",
];

export const DETAIL_NAMES: readonly string[] = [
  "",
  "NOT_STANDSTILL",
  "TOOL_DEPLOYED",
  "ARM_NOT_DEPLOYED",
  "NO_JOINT",
  "UNREACHABLE",
  "NOT_IN_GROOVE",
  "BUSY",
  "COVERAGE",
  "WRONG_TOOL",
  "VIBRATION",
  "FAULTED",
  "BAD_STATE",
];

export function statusName(status: number): string {
  return STATUS_NAMES[status] ?? `STATUS_${status}`;
}

export function detailName(detail: number): string {
  return DETAIL_NAMES[detail] ?? `DETAIL_${detail}`;
}

// STATE flag bits.
export const FLAG_ARM_DEPLOYED = 0x01;
export const FLAG_LOCK_TAKEN = 0x02;
export const FLAG_TOOL_BUSY = 0x04;
export const FLAG_AUTOPILOT = 0x08;

/** Sensor field sentinel meaning "no joint ahead". */
export const SENSOR_NO_JOINT = 0x7fffffff;

export const MISSION_NAMES: readonly string[] = [
  "DRIVING",
  "ALIGNING",
  "EXTENDING",
  "EXTENDED_IDLE",
  "CLEANING",
  "SEAL_PREP",
  "SEALING",
  "FINISHING",
  "COMPRESSING",
  "FAULT",
  "DONE",
];

export const MODE_NAMES: readonly string[] = ["COMPRESSED", "EXTENDED"];

export const TOOL_NAMES: Readonly<Record<number, string>> = {
  0: "BRUSH_STRAIGHT",
  1: "BRUSH_TAPERED",
  2: "NOZZLE",
  3: "SPATULA",
  [TOOL_STOW]: "NONE",
};

export const EVENT_FAULT = 0;
export const EVENT_PHASE = 1;
export const EVENT_JOINT_DONE = 2;
export const EVENT_CARTRIDGE = 3;

export const EVENT_NAMES: readonly string[] = [
  "FAULT",
  "PHASE",
  "JOINT_DONE",
  "CARTRIDGE",
];

// ---------------------------------------------------------------------------
// CRC-32 (IEEE 802.3 reflected polynomial, init/final 0xFFFFFFFF).

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(data: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]!) & 0xff]! ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

// ---------------------------------------------------------------------------
// Messages.

export interface LegTelemetry {
  extension01mm: number;
  force01n: number;
}

export type Message =
  | { type: "drive"; vLeftMmS: number; vRightMmS: number }
  | { type: "mode"; extend: boolean }
  | { type: "toolSelect"; kind: number }
  | { type: "toolMove"; rMm: number; thetaCentideg: number; zMm: number }
  | { type: "inject"; start: boolean }
  | { type: "spatula" }
  | { type: "clean"; passes: number; brush: number }
  | { type: "cartridgeLoad" }
  | { type: "lock"; acquire: boolean }
  | { type: "estop" }
  | { type: "heartbeat" }
  | {
      type: "state";
      tick: number;
      axial01mm: number;
      lateral001mm: number;
      yaw01mrad: number;
      mode: number;
      mission: number;
      toolKind: number;
      flags: number;
      legs: LegTelemetry[];
      toolR01mm: number;
      toolThetaCentideg: number;
      toolZ01mm: number;
      cartridgeMm3: number;
      sensor001mm: number;
    }
  | { type: "jointMap"; jointIndex: number; corrosion: Uint8Array; coverage: Uint8Array }
  | { type: "event"; code: number; detail: number }
  | { type: "ackNack"; ackSeq: number; status: number; detail: number }
  | { type: "unknown"; msgType: number }
  | { type: "malformed"; msgType: number; status: number };

export type CommandMessage = Extract<
  Message,
  {
    type:
      | "drive"
      | "mode"
      | "toolSelect"
      | "toolMove"
      | "inject"
      | "spatula"
      | "clean"
      | "cartridgeLoad"
      | "lock"
      | "estop"
      | "heartbeat";
  }
>;

export type StateMessage = Extract<Message, { type: "state" }>;
export type JointMapMessage = Extract<Message, { type: "jointMap" }>;
export type EventMessage = Extract<Message, { type: "event" }>;
export type AckNackMessage = Extract<Message, { type: "ackNack" }>;

/** Field-validation failure while encoding or decoding a payload. */
export class CodecError extends Error {
  readonly status: number;

  constructor(message: string, status: number) {
    super(message);
    this.name = "CodecError";
    this.status = status;
  }
}

function checkRange(value: number, lo: number, hi: number, name: string): void {
  if (!Number.isInteger(value) || value < lo || value > hi) {
    throw new CodecError(`${name} ${value} out of [${lo},${hi}]`, NACK_RANGE);
  }
}

function checkLen(payload: Uint8Array, expected: number): DataView {
  if (payload.length !== expected) {
    throw new CodecError(
      `payload length ${payload.length}, expected ${expected}`,
      NACK_BAD_LENGTH,
    );
  }
  return new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
}

function msgType(msg: Message): number {
  switch (msg.type) {
    case "drive":
      return MSG_DRIVE;
    case "mode":
      return MSG_MODE;
    case "toolSelect":
      return MSG_TOOL_SELECT;
    case "toolMove":
      return MSG_TOOL_MOVE;
    case "inject":
      return MSG_INJECT;
    case "spatula":
      return MSG_SPATULA;
    case "clean":
      return MSG_CLEAN;
    case "cartridgeLoad":
      return MSG_CARTRIDGE_LOAD;
    case "lock":
      return MSG_LOCK;
    case "estop":
      return MSG_ESTOP;
    case "heartbeat":
      return MSG_HEARTBEAT;
    case "state":
      return MSG_STATE;
    case "jointMap":
      return MSG_JOINT_MAP;
    case "event":
      return MSG_EVENT;
    case "ackNack":
      return MSG_ACK;
    case "unknown":
    case "malformed":
      throw new CodecError(`cannot encode placeholder ${msg.type}`, NACK_RANGE);
  }
}

export function encodePayload(msg: Message): Uint8Array {
  switch (msg.type) {
    case "drive": {
      checkRange(msg.vLeftMmS, -32768, 32767, "v_left");
      checkRange(msg.vRightMmS, -32768, 32767, "v_right");
      const out = new Uint8Array(4);
      const view = new DataView(out.buffer);
      view.setInt16(0, msg.vLeftMmS);
      view.setInt16(2, msg.vRightMmS);
      return out;
    }
    case "mode":
      return Uint8Array.of(msg.extend ? 1 : 0);
    case "toolSelect":
      checkRange(msg.kind, 0, 255, "kind");
      return Uint8Array.of(msg.kind);
    case "toolMove": {
      checkRange(msg.rMm, 0, 65535, "r");
      checkRange(msg.thetaCentideg, 0, 35999, "theta");
      checkRange(msg.zMm, -32768, 32767, "z");
      const out = new Uint8Array(6);
      const view = new DataView(out.buffer);
      view.setUint16(0, msg.rMm);
      view.setUint16(2, msg.thetaCentideg);
      view.setInt16(4, msg.zMm);
      return out;
    }
    case "inject":
      return Uint8Array.of(msg.start ? 1 : 0);
    case "spatula":
    case "cartridgeLoad":
    case "estop":
    case "heartbeat":
      return new Uint8Array(0);
    case "clean":
      checkRange(msg.passes, 0, 255, "passes");
      checkRange(msg.brush, 0, 255, "brush");
      return Uint8Array.of(msg.passes, msg.brush);
    case "lock":
      return Uint8Array.of(msg.acquire ? 1 : 0);
    case "state": {
      if (msg.legs.length !== 6) {
        throw new CodecError("state needs exactly 6 legs", NACK_RANGE);
      }
      const out = new Uint8Array(54);
      const view = new DataView(out.buffer);
      view.setUint32(0, msg.tick >>> 0);
      view.setUint32(4, msg.axial01mm);
      view.setInt16(8, msg.lateral001mm);
      view.setInt16(10, msg.yaw01mrad);
      view.setUint8(12, msg.mode);
      view.setUint8(13, msg.mission);
      view.setUint8(14, msg.toolKind);
      view.setUint8(15, msg.flags);
      for (let i = 0; i < 6; i++) {
        view.setUint16(16 + 4 * i, msg.legs[i]!.extension01mm);
        view.setUint16(18 + 4 * i, msg.legs[i]!.force01n);
      }
      view.setUint16(40, msg.toolR01mm);
      view.setUint16(42, msg.toolThetaCentideg);
      view.setInt16(44, msg.toolZ01mm);
      view.setUint32(46, msg.cartridgeMm3);
      view.setInt32(50, msg.sensor001mm);
      return out;
    }
    case "jointMap": {
      if (msg.corrosion.length !== msg.coverage.length) {
        throw new CodecError("sector maps must have equal length", NACK_RANGE);
      }
      checkRange(msg.jointIndex, 0, 65535, "joint_index");
      const n = msg.corrosion.length;
      const out = new Uint8Array(4 + 2 * n);
      const view = new DataView(out.buffer);
      view.setUint16(0, msg.jointIndex);
      view.setUint16(2, n);
      out.set(msg.corrosion, 4);
      out.set(msg.coverage, 4 + n);
      return out;
    }
    case "event": {
      checkRange(msg.code, 0, 255, "code");
      checkRange(msg.detail, -(2 ** 31), 2 ** 31 - 1, "detail");
      const out = new Uint8Array(5);
      const view = new DataView(out.buffer);
      view.setUint8(0, msg.code);
      view.setInt32(1, msg.detail);
      return out;
    }
    case "ackNack": {
      checkRange(msg.ackSeq, 0, 65535, "ack_seq");
      checkRange(msg.status, 0, 255, "status");
      checkRange(msg.detail, 0, 255, "detail");
      const out = new Uint8Array(4);
      const view = new DataView(out.buffer);
      view.setUint16(0, msg.ackSeq);
      view.setUint8(2, msg.status);
      view.setUint8(3, msg.detail);
      return out;
    }
    case "unknown":
    case "malformed":
      throw new CodecError(`cannot encode placeholder ${msg.type}`, NACK_RANGE);
  }
}

export function decodePayload(type: number, payload: Uint8Array): Message {
  switch (type) {
    case MSG_DRIVE: {
      const view = checkLen(payload, 4);
      return { type: "drive", vLeftMmS: view.getInt16(0), vRightMmS: view.getInt16(2) };
    }
    case MSG_MODE: {
      checkLen(payload, 1);
      checkRange(payload[0]!, 0, 1, "mode");
      return { type: "mode", extend: payload[0] === 1 };
    }
    case MSG_TOOL_SELECT:
      checkLen(payload, 1);
      return { type: "toolSelect", kind: payload[0]! };
    case MSG_TOOL_MOVE: {
      const view = checkLen(payload, 6);
      const theta = view.getUint16(2);
      checkRange(theta, 0, 35999, "theta");
      return {
        type: "toolMove",
        rMm: view.getUint16(0),
        thetaCentideg: theta,
        zMm: view.getInt16(4),
      };
    }
    case MSG_INJECT:
      checkLen(payload, 1);
      checkRange(payload[0]!, 0, 1, "inject");
      return { type: "inject", start: payload[0] === 1 };
    case MSG_SPATULA:
      checkLen(payload, 0);
      return { type: "spatula" };
    case MSG_CLEAN:
      checkLen(payload, 2);
      return { type: "clean", passes: payload[0]!, brush: payload[1]! };
    case MSG_CARTRIDGE_LOAD:
      checkLen(payload, 0);
      return { type: "cartridgeLoad" };
    case MSG_LOCK:
      checkLen(payload, 1);
      checkRange(payload[0]!, 0, 1, "lock");
      return { type: "lock", acquire: payload[0] === 1 };
    case MSG_ESTOP:
      checkLen(payload, 0);
      return { type: "estop" };
    case MSG_HEARTBEAT:
      checkLen(payload, 0);
      return { type: "heartbeat" };
    case MSG_STATE: {
      const view = checkLen(payload, 54);
      const legs: LegTelemetry[] = [];
      for (let i = 0; i < 6; i++) {
        legs.push({
          extension01mm: view.getUint16(16 + 4 * i),
          force01n: view.getUint16(18 + 4 * i),
        });
      }
      return {
        type: "state",
        tick: view.getUint32(0),
        axial01mm: view.getUint32(4),
        lateral001mm: view.getInt16(8),
        yaw01mrad: view.getInt16(10),
        mode: view.getUint8(12),
        mission: view.getUint8(13),
        toolKind: view.getUint8(14),
        flags: view.getUint8(15),
        legs,
        toolR01mm: view.getUint16(40),
        toolThetaCentideg: view.getUint16(42),
        toolZ01mm: view.getInt16(44),
        cartridgeMm3: view.getUint32(46),
        sensor001mm: view.getInt32(50),
      };
    }
    case MSG_JOINT_MAP: {
      if (payload.length < 4) {
        throw new CodecError("joint map too short", NACK_BAD_LENGTH);
      }
      const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
      const idx = view.getUint16(0);
      const n = view.getUint16(2);
      checkLen(payload, 4 + 2 * n);
      return {
        type: "jointMap",
        jointIndex: idx,
        corrosion: payload.slice(4, 4 + n),
        coverage: payload.slice(4 + n, 4 + 2 * n),
      };
    }
    case MSG_EVENT: {
      const view = checkLen(payload, 5);
      return { type: "event", code: view.getUint8(0), detail: view.getInt32(1) };
    }
    case MSG_ACK: {
      const view = checkLen(payload, 4);
      return {
        type: "ackNack",
        ackSeq: view.getUint16(0),
        status: view.getUint8(2),
        detail: view.getUint8(3),
      };
    }
    default:
      return { type: "unknown", msgType: type };
  }
}

// ---------------------------------------------------------------------------
// Framing.

export function encodeFrame(msg: Message, seq: number): Uint8Array {
  checkRange(seq, 0, 0xffff, "seq");
  const payload = encodePayload(msg);
  if (payload.length > MAX_PAYLOAD) {
    throw new CodecError(`payload ${payload.length} exceeds ${MAX_PAYLOAD}`, NACK_RANGE);
  }
  const frame = new Uint8Array(HEADER_LEN + payload.length + CRC_LEN);
  const view = new DataView(frame.buffer);
  frame[0] = MAGIC0;
  frame[1] = MAGIC1;
  frame[2] = VERSION;
  frame[3] = msgType(msg);
  view.setUint16(4, seq);
  view.setUint16(6, payload.length);
  frame.set(payload, HEADER_LEN);
  view.setUint32(
    HEADER_LEN + payload.length,
    crc32(frame.subarray(0, HEADER_LEN + payload.length)),
  );
  return frame;
}

export interface DecodedFrame {
  seq: number;
  msg: Message;
}

function findMagic(buf: Uint8Array, from: number): number {
  for (let i = from; i + 1 < buf.length; i++) {
    if (buf[i] === MAGIC0 && buf[i + 1] === MAGIC1) return i;
  }
  return -1;
}

function concat(a: Uint8Array, b: Uint8Array): Uint8Array {
  if (a.length === 0) return b;
  if (b.length === 0) return a;
  const out = new Uint8Array(a.length + b.length);
  out.set(a, 0);
  out.set(b, a.length);
  return out;
}

/**
 * Incremental frame decoder over an arbitrary byte stream.
 *
 * Feed it chunks as they arrive; it returns the complete frames found,
 * retains partial trailing data, resynchronizes on the magic after
 * corruption, and counts what it drops.
 */
export class Decoder {
  private buf: Uint8Array = new Uint8Array(0);
  crcMismatches = 0;
  resyncs = 0;

  feed(data: Uint8Array): DecodedFrame[] {
    let buf = concat(this.buf, data);
    const out: DecodedFrame[] = [];
    for (;;) {
      const idx = findMagic(buf, 0);
      if (idx < 0) {
        if (buf.length > 0) this.resyncs++;
        // A lone trailing 0x44 could be the start of the next magic.
        buf =
          buf.length > 0 && buf[buf.length - 1] === MAGIC0
            ? buf.subarray(buf.length - 1)
            : new Uint8Array(0);
        break;
      }
      if (idx > 0) {
        this.resyncs++;
        buf = buf.subarray(idx);
      }
      if (buf.length < HEADER_LEN) break;
      const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
      const version = buf[2]!;
      const seq = view.getUint16(4);
      const length = view.getUint16(6);
      if (version !== VERSION || length > MAX_PAYLOAD) {
        this.resyncs++;
        buf = buf.subarray(2);
        continue;
      }
      const total = HEADER_LEN + length + CRC_LEN;
      if (buf.length < total) break;
      const body = buf.subarray(0, HEADER_LEN + length);
      const crc = view.getUint32(HEADER_LEN + length);
      if (crc32(body) !== crc) {
        this.crcMismatches++;
        buf = buf.subarray(2);
        continue;
      }
      const type = body[3]!;
      const payload = body.slice(HEADER_LEN);
      buf = buf.subarray(total);
      let msg: Message;
      try {
        msg = decodePayload(type, payload);
      } catch (err) {
        if (err instanceof CodecError) {
          msg = { type: "malformed", msgType: type, status: err.status };
        } else {
          throw err;
        }
      }
      out.push({ seq, msg });
    }
    // Copy the remainder so the retained window never pins a large buffer.
    this.buf = buf.slice();
    return out;
  }
}

// ---------------------------------------------------------------------------
// Engineering-unit view of STATE (documented fixed-point scales).

export interface StateSnapshot {
  tick: number;
  axialMm: number;
  lateralMm: number;
  yawMrad: number;
  mode: number;
  mission: number;
  toolKind: number;
  flags: number;
  armDeployed: boolean;
  lockTaken: boolean;
  toolBusy: boolean;
  autopilotActive: boolean;
  legs: { extensionMm: number; forceN: number }[];
  toolRMm: number;
  toolThetaDeg: number;
  toolZMm: number;
  cartridgeMm3: number;
  /** Distance to the next joint ahead, or null when none is in view. */
  sensorMm: number | null;
}

export function toSnapshot(msg: StateMessage): StateSnapshot {
  return {
    tick: msg.tick,
    axialMm: msg.axial01mm / 10,
    lateralMm: msg.lateral001mm / 100,
    yawMrad: msg.yaw01mrad / 10,
    mode: msg.mode,
    mission: msg.mission,
    toolKind: msg.toolKind,
    flags: msg.flags,
    armDeployed: (msg.flags & FLAG_ARM_DEPLOYED) !== 0,
    lockTaken: (msg.flags & FLAG_LOCK_TAKEN) !== 0,
    toolBusy: (msg.flags & FLAG_TOOL_BUSY) !== 0,
    autopilotActive: (msg.flags & FLAG_AUTOPILOT) !== 0,
    legs: msg.legs.map((leg) => ({
      extensionMm: leg.extension01mm / 10,
      forceN: leg.force01n / 10,
    })),
    toolRMm: msg.toolR01mm / 10,
    toolThetaDeg: msg.toolThetaCentideg / 100,
    toolZMm: msg.toolZ01mm / 10,
    cartridgeMm3: msg.cartridgeMm3,
    sensorMm: msg.sensor001mm === SENSOR_NO_JOINT ? null : msg.sensor001mm / 100,
  };
}

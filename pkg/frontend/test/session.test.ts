import { afterEach, describe, expect, it, vi } from "vitest";

import {
  Decoder,
  FLAG_LOCK_TAKEN,
  Message,
  NACK_GATE_NOT_MET,
  StateMessage,
  encodeFrame,
} from "../src/codec.js";
import {
  ConsoleSession,
  LockRequiredError,
  SessionError,
  SessionEvent,
  SessionOptions,
  SocketLike,
} from "../src/session.js";

class FakeSocket implements SocketLike {
  binaryType = "blob";
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  sent: Uint8Array[] = [];
  closed = false;

  send(data: Uint8Array): void {
    this.sent.push(data.slice());
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  push(msg: Message, seq: number): void {
    const frame = encodeFrame(msg, seq);
    // Deliver as ArrayBuffer, the way a browser socket does.
    this.onmessage?.({
      data: frame.buffer.slice(frame.byteOffset, frame.byteOffset + frame.byteLength),
    });
  }

  dropFromServer(): void {
    this.onclose?.();
  }

  /** Decode everything the session sent, in order. */
  sentMessages(): { seq: number; msg: Message }[] {
    const decoder = new Decoder();
    return this.sent.flatMap((frame) => decoder.feed(frame));
  }
}

function makeSession(
  overrides: Partial<SessionOptions> = {},
): { session: ConsoleSession; sockets: FakeSocket[]; events: SessionEvent[] } {
  const sockets: FakeSocket[] = [];
  const events: SessionEvent[] = [];
  const session = new ConsoleSession({
    url: "ws://test:4858",
    socketFactory: () => {
      const socket = new FakeSocket();
      sockets.push(socket);
      return socket;
    },
    heartbeatMs: 0,
    reconnect: false,
    ...overrides,
  });
  session.on((event) => events.push(event));
  return { session, sockets, events };
}

function openSession(
  overrides: Partial<SessionOptions> = {},
): { session: ConsoleSession; socket: FakeSocket; sockets: FakeSocket[]; events: SessionEvent[] } {
  const { session, sockets, events } = makeSession(overrides);
  session.connect();
  const socket = sockets[0]!;
  socket.open();
  return { session, socket, sockets, events };
}

function stateMsg(overrides: Partial<StateMessage> = {}): StateMessage {
  return {
    type: "state",
    tick: 1,
    axial01mm: 0,
    lateral001mm: 0,
    yaw01mrad: 0,
    mode: 0,
    mission: 0,
    toolKind: 0xff,
    flags: 0,
    legs: Array.from({ length: 6 }, () => ({ extension01mm: 0, force01n: 0 })),
    toolR01mm: 4700,
    toolThetaCentideg: 0,
    toolZ01mm: 0,
    cartridgeMm3: 2_000_000,
    sensor001mm: 500,
    ...overrides,
  };
}

/** Grant the lock: respond ACK to the pending LOCK command. */
async function grantLock(session: ConsoleSession, socket: FakeSocket): Promise<void> {
  const promise = session.takeLock();
  const lockFrame = socket.sentMessages().find((f) => f.msg.type === "lock");
  expect(lockFrame).toBeDefined();
  socket.push({ type: "ackNack", ackSeq: lockFrame!.seq, status: 0, detail: 0 }, 0);
  await expect(promise).resolves.toMatchObject({ ok: true });
}

afterEach(() => {
  vi.useRealTimers();
});

describe("connection lifecycle", () => {
  it("sets binary mode and heartbeats immediately on open", () => {
    const { socket } = openSession();
    expect(socket.binaryType).toBe("arraybuffer");
    const sent = socket.sentMessages();
    expect(sent).toHaveLength(1);
    expect(sent[0]!.msg.type).toBe("heartbeat");
  });

  it("refuses to send while disconnected", () => {
    const { session } = makeSession();
    expect(() => session.estop()).toThrow(SessionError);
  });

  it("keeps heartbeating on the configured period", () => {
    vi.useFakeTimers();
    const { socket } = openSession({ heartbeatMs: 1000 });
    vi.advanceTimersByTime(3000);
    const beats = socket.sentMessages().filter((f) => f.msg.type === "heartbeat");
    expect(beats.length).toBe(4); // one on open + three timed
  });
});

describe("command sequencing", () => {
  it("assigns strictly increasing seq numbers", async () => {
    const { session, socket } = openSession();
    await grantLock(session, socket);
    void session.drive(10, 10).catch(() => undefined);
    void session.stop().catch(() => undefined);
    void session.estop().catch(() => undefined);
    const seqs = socket.sentMessages().map((f) => f.seq);
    expect(seqs).toEqual([0, 1, 2, 3, 4]); // heartbeat, lock, then the three
  });

  it("resolves each command against exactly its own ACK", async () => {
    const { session, socket } = openSession();
    await grantLock(session, socket);
    const a = session.drive(10, 10);
    const b = session.drive(20, 20);
    const sent = socket.sentMessages();
    const driveSeqs = sent.filter((f) => f.msg.type === "drive").map((f) => f.seq);
    // ACK the second command first; the first stays pending.
    socket.push({ type: "ackNack", ackSeq: driveSeqs[1]!, status: 0, detail: 0 }, 1);
    await expect(b).resolves.toMatchObject({ ok: true });
    socket.push({ type: "ackNack", ackSeq: driveSeqs[0]!, status: 2, detail: 1 }, 2);
    await expect(a).resolves.toMatchObject({
      ok: false,
      statusName: "INTERLOCK",
      detailName: "NOT_STANDSTILL",
    });
  });

  it("counts an ACK that matches nothing as an anomaly", () => {
    const { session, socket } = openSession();
    socket.push({ type: "ackNack", ackSeq: 999 & 0xffff, status: 0, detail: 0 }, 0);
    expect(session.anomalies.unexpectedAcks).toBe(1);
  });

  it("surfaces NACK GATE_NOT_MET with its name", async () => {
    const { session, socket } = openSession();
    await grantLock(session, socket);
    const promise = session.inject(true);
    const frame = socket.sentMessages().find((f) => f.msg.type === "inject")!;
    socket.push(
      { type: "ackNack", ackSeq: frame.seq, status: NACK_GATE_NOT_MET, detail: 0 },
      0,
    );
    await expect(promise).resolves.toMatchObject({
      ok: false,
      status: NACK_GATE_NOT_MET,
      statusName: "GATE_NOT_MET",
    });
  });

  it("rejects pending commands when the connection drops", async () => {
    const { session, socket } = openSession();
    await grantLock(session, socket);
    const pending = session.drive(10, 10);
    socket.dropFromServer();
    await expect(pending).rejects.toThrow("disconnected");
  });
});

describe("operator lock", () => {
  it("refuses lock-gated commands locally before the lock is held", () => {
    const { session } = openSession();
    expect(() => session.drive(10, 10)).toThrow(LockRequiredError);
    expect(() => session.selectTool(2)).toThrow(LockRequiredError);
    expect(() => session.inject(true)).toThrow(LockRequiredError);
  });

  it("always allows estop, heartbeat, and lock without the lock", () => {
    const { session, socket } = openSession();
    void session.estop().catch(() => undefined);
    void session.send({ type: "heartbeat" }).catch(() => undefined);
    void session.takeLock().catch(() => undefined);
    const types = socket.sentMessages().map((f) => f.msg.type);
    expect(types).toEqual(["heartbeat", "estop", "heartbeat", "lock"]);
  });

  it("holds the lock after the grant and releases on the release ACK", async () => {
    const { session, socket, events } = openSession();
    await grantLock(session, socket);
    expect(session.lockHeld).toBe(true);
    const release = session.releaseLock();
    const frame = socket
      .sentMessages()
      .filter((f) => f.msg.type === "lock")
      .at(-1)!;
    socket.push({ type: "ackNack", ackSeq: frame.seq, status: 0, detail: 0 }, 1);
    await expect(release).resolves.toMatchObject({ ok: true });
    expect(session.lockHeld).toBe(false);
    const lockEvents = events.filter((e) => e.kind === "lock");
    expect(lockEvents.map((e) => (e.kind === "lock" ? e.held : null))).toEqual([
      true,
      false,
    ]);
  });

  it("drops the mirrored lock when telemetry shows it revoked", async () => {
    const { session, socket } = openSession();
    await grantLock(session, socket);
    // A pre-grant frame still in flight must not revoke anything.
    socket.push(stateMsg({ tick: 10, flags: 0 }), 1);
    expect(session.lockHeld).toBe(true);
    // Telemetry confirms the lock, then shows it gone (e.g. server-side
    // dead-man release): only then does the mirror drop.
    socket.push(stateMsg({ tick: 11, flags: FLAG_LOCK_TAKEN }), 2);
    expect(session.lockHeld).toBe(true);
    socket.push(stateMsg({ tick: 12, flags: 0 }), 3);
    expect(session.lockHeld).toBe(false);
  });

  it("clears the lock when the socket closes", async () => {
    const { session, socket } = openSession();
    await grantLock(session, socket);
    socket.dropFromServer();
    expect(session.lockHeld).toBe(false);
  });
});

describe("telemetry bookkeeping", () => {
  it("keeps the latest snapshot and the per-joint maps", () => {
    const { session, socket } = openSession();
    socket.push(stateMsg({ tick: 5 }), 0);
    socket.push(stateMsg({ tick: 6, axial01mm: 120 }), 1);
    expect(session.snapshot?.tick).toBe(6);
    expect(session.snapshot?.axialMm).toBeCloseTo(12.0, 9);
    const corrosion = new Uint8Array(72).fill(10);
    const coverage = new Uint8Array(72).fill(0);
    socket.push({ type: "jointMap", jointIndex: 3, corrosion, coverage }, 2);
    expect(session.jointMaps.get(3)?.jointIndex).toBe(3);
  });

  it("collects events in arrival order", () => {
    const { session, socket } = openSession();
    socket.push({ type: "event", code: 1, detail: 4 }, 0);
    socket.push({ type: "event", code: 2, detail: 0 }, 1);
    expect(session.events.map((e) => e.code)).toEqual([1, 2]);
  });

  it("flags a telemetry tick gap as stale and recovers on contiguity", () => {
    const { session, socket } = openSession();
    socket.push(stateMsg({ tick: 100 }), 0);
    expect(session.isStale(0)).toBe(false);
    socket.push(stateMsg({ tick: 200 }), 1); // 100-tick hole = 2 s of sim
    expect(session.tickGapStale).toBe(true);
    expect(session.isStale(0)).toBe(true);
    socket.push(stateMsg({ tick: 201 }), 2);
    expect(session.isStale(0)).toBe(false);
  });

  it("flags wall-clock telemetry silence as stale", () => {
    let nowMs = 1_000;
    const { session, socket } = openSession({ now: () => nowMs });
    socket.push(stateMsg({ tick: 1 }), 0);
    nowMs += 900;
    expect(session.isStale()).toBe(false);
    nowMs += 200;
    expect(session.isStale()).toBe(true);
    expect(session.msSinceLastState()).toBe(1100);
  });

  it("counts server frame-seq gaps", () => {
    const { session, socket } = openSession();
    socket.push(stateMsg({ tick: 1 }), 0);
    socket.push(stateMsg({ tick: 2 }), 1);
    socket.push(stateMsg({ tick: 3 }), 5); // skipped 2..4
    expect(session.anomalies.wireSeqGaps).toBe(1);
  });
});

describe("reconnect", () => {
  it("retries with exponential backoff until the user closes", () => {
    vi.useFakeTimers();
    const { session, sockets } = makeSession({
      reconnect: true,
      reconnectDelayMs: 500,
      maxReconnectDelayMs: 5000,
    });
    session.connect();
    sockets[0]!.open();
    expect(session.connected).toBe(true);

    sockets[0]!.dropFromServer();
    expect(session.connected).toBe(false);
    expect(sockets).toHaveLength(1);
    vi.advanceTimersByTime(499);
    expect(sockets).toHaveLength(1);
    vi.advanceTimersByTime(1);
    expect(sockets).toHaveLength(2); // first retry after 500 ms

    sockets[1]!.dropFromServer();
    vi.advanceTimersByTime(999);
    expect(sockets).toHaveLength(2);
    vi.advanceTimersByTime(1);
    expect(sockets).toHaveLength(3); // second retry after 1000 ms

    sockets[2]!.open();
    expect(session.connected).toBe(true);

    session.close();
    vi.advanceTimersByTime(60_000);
    expect(sockets).toHaveLength(3); // user close stops the loop
  });

  it("emits connection events both ways", () => {
    const { socket, events, session } = openSession();
    socket.dropFromServer();
    const kinds = events
      .filter((e) => e.kind === "connection")
      .map((e) => (e.kind === "connection" ? e.connected : null));
    expect(kinds).toEqual([true, false]);
    expect(session.connected).toBe(false);
  });
});

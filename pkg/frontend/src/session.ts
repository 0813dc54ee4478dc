/**
 * Operator session over the bridge socket.
 *
 * Owns the command seq counter (strictly increasing, wrapping at 2^16),
 * resolves every sent command against exactly one ACK/NACK, tracks the
 * operator lock, and keeps the latest telemetry snapshot plus per-joint
 * sector maps.  Commands other than estop, heartbeat, and lock are
 * refused locally while the lock is not held — the server enforces the
 * same rule, this just keeps the console honest.
 */

import {
  AckNackMessage,
  CommandMessage,
  Decoder,
  EventMessage,
  JointMapMessage,
  StateSnapshot,
  TOOL_STOW,
  detailName,
  encodeFrame,
  statusName,
  toSnapshot,
} from "./codec.js";

/** Minimal socket surface shared by the browser WebSocket and `ws`. */
export interface SocketLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: Uint8Array): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export class SessionError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SessionError";
  }
}

export class LockRequiredError extends SessionError {
  constructor() {
    super("operator lock not held");
    this.name = "LockRequiredError";
  }
}

export interface AckResult {
  ok: boolean;
  status: number;
  detail: number;
  statusName: string;
  detailName: string;
}

export interface SessionAnomalies {
  /** Server frame seq counter skipped (telemetry lost in transit). */
  wireSeqGaps: number;
  /** ACK frames that matched no pending command. */
  unexpectedAcks: number;
  /** Undecodable frames from the server (should never happen). */
  decodeDrops: number;
}

export type SessionEvent =
  | { kind: "connection"; connected: boolean }
  | { kind: "state"; snapshot: StateSnapshot }
  | { kind: "jointMap"; map: JointMapMessage }
  | { kind: "event"; event: EventMessage }
  | { kind: "ack"; seq: number; command: CommandMessage; result: AckResult }
  | { kind: "lock"; held: boolean }
  | { kind: "anomaly"; message: string };

export type SessionListener = (event: SessionEvent) => void;

export interface SessionOptions {
  url: string;
  socketFactory?: SocketFactory;
  /** Liveness ping period; 0 disables the timer. */
  heartbeatMs?: number;
  /** Reconnect after an unexpected close; doubles per attempt. */
  reconnect?: boolean;
  reconnectDelayMs?: number;
  maxReconnectDelayMs?: number;
  /** Telemetry silence treated as stale, wall-clock ms. */
  staleAfterMs?: number;
  /** Telemetry tick jump treated as a gap (50 ticks = 1 s of sim). */
  staleTickGap?: number;
  now?: () => number;
}

interface Pending {
  command: CommandMessage;
  resolve: (result: AckResult) => void;
  reject: (err: Error) => void;
}

function requiresLock(msg: CommandMessage): boolean {
  return msg.type !== "estop" && msg.type !== "heartbeat" && msg.type !== "lock";
}

function defaultFactory(url: string): SocketLike {
  return new WebSocket(url) as unknown as SocketLike;
}

export class ConsoleSession {
  readonly url: string;

  private readonly factory: SocketFactory;
  private readonly heartbeatMs: number;
  private readonly reconnectEnabled: boolean;
  private readonly reconnectDelayMs: number;
  private readonly maxReconnectDelayMs: number;
  private readonly staleAfterMs: number;
  private readonly staleTickGap: number;
  private readonly now: () => number;

  private socket: SocketLike | null = null;
  private decoder = new Decoder();
  private listeners: SessionListener[] = [];
  private pending = new Map<number, Pending>();
  private seqCounter = 0;
  private serverSeq: number | null = null;
  private heartbeatTimer: ReturnType<typeof setInterval> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private reconnectAttempt = 0;
  private closedByUser = false;
  private lockConfirmedByState = false;

  connected = false;
  lockHeld = false;
  snapshot: StateSnapshot | null = null;
  /** Sim-time hole detected between consecutive STATE frames. */
  tickGapStale = false;
  lastStateWallMs: number | null = null;
  jointMaps = new Map<number, JointMapMessage>();
  events: EventMessage[] = [];
  anomalies: SessionAnomalies = { wireSeqGaps: 0, unexpectedAcks: 0, decodeDrops: 0 };

  constructor(options: SessionOptions) {
    this.url = options.url;
    this.factory = options.socketFactory ?? defaultFactory;
    this.heartbeatMs = options.heartbeatMs ?? 1000;
    this.reconnectEnabled = options.reconnect ?? true;
    this.reconnectDelayMs = options.reconnectDelayMs ?? 500;
    this.maxReconnectDelayMs = options.maxReconnectDelayMs ?? 5000;
    this.staleAfterMs = options.staleAfterMs ?? 1000;
    this.staleTickGap = options.staleTickGap ?? 50;
    this.now = options.now ?? (() => Date.now());
  }

  on(listener: SessionListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(event: SessionEvent): void {
    for (const listener of [...this.listeners]) listener(event);
  }

  connect(): void {
    if (this.socket !== null) return;
    this.closedByUser = false;
    const socket = this.factory(this.url);
    socket.binaryType = "arraybuffer";
    socket.onopen = () => this.handleOpen();
    socket.onmessage = (ev) => this.handleMessage(ev.data);
    socket.onclose = () => this.handleClose();
    socket.onerror = () => {
      /* the close handler owns recovery */
    };
    this.socket = socket;
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.stopHeartbeat();
    if (this.socket !== null) this.socket.close();
  }

  private handleOpen(): void {
    this.connected = true;
    this.reconnectAttempt = 0;
    this.decoder = new Decoder();
    this.serverSeq = null;
    this.emit({ kind: "connection", connected: true });
    void this.send({ type: "heartbeat" }).catch(() => undefined);
    if (this.heartbeatMs > 0) {
      this.heartbeatTimer = setInterval(() => {
        if (this.connected) {
          void this.send({ type: "heartbeat" }).catch(() => undefined);
        }
      }, this.heartbeatMs);
    }
  }

  private handleClose(): void {
    const wasConnected = this.connected;
    this.connected = false;
    this.socket = null;
    this.stopHeartbeat();
    for (const pending of this.pending.values()) {
      pending.reject(new SessionError("disconnected before the command resolved"));
    }
    this.pending.clear();
    if (this.lockHeld) {
      // The server's dead-man rule released the lock with the session.
      this.lockHeld = false;
      this.lockConfirmedByState = false;
      this.emit({ kind: "lock", held: false });
    }
    if (wasConnected) this.emit({ kind: "connection", connected: false });
    if (!this.closedByUser && this.reconnectEnabled) {
      const delay = Math.min(
        this.reconnectDelayMs * 2 ** this.reconnectAttempt,
        this.maxReconnectDelayMs,
      );
      this.reconnectAttempt++;
      this.reconnectTimer = setTimeout(() => {
        this.reconnectTimer = null;
        this.connect();
      }, delay);
    }
  }

  private stopHeartbeat(): void {
    if (this.heartbeatTimer !== null) {
      clearInterval(this.heartbeatTimer);
      this.heartbeatTimer = null;
    }
  }

  private handleMessage(data: unknown): void {
    let bytes: Uint8Array;
    if (data instanceof ArrayBuffer) {
      bytes = new Uint8Array(data);
    } else if (data instanceof Uint8Array) {
      bytes = data;
    } else {
      this.anomalies.decodeDrops++;
      return;
    }
    for (const frame of this.decoder.feed(bytes)) {
      this.trackServerSeq(frame.seq);
      const msg = frame.msg;
      switch (msg.type) {
        case "state": {
          const snapshot = toSnapshot(msg);
          this.trackTickGap(snapshot.tick);
          this.snapshot = snapshot;
          this.lastStateWallMs = this.now();
          this.mirrorLockFlag(snapshot);
          this.emit({ kind: "state", snapshot });
          break;
        }
        case "jointMap":
          this.jointMaps.set(msg.jointIndex, msg);
          this.emit({ kind: "jointMap", map: msg });
          break;
        case "event":
          this.events.push(msg);
          if (this.events.length > 500) this.events.shift();
          this.emit({ kind: "event", event: msg });
          break;
        case "ackNack":
          this.resolveAck(msg);
          break;
        default:
          this.anomalies.decodeDrops++;
          this.emit({
            kind: "anomaly",
            message: `undecodable server frame (${msg.type})`,
          });
      }
    }
  }

  private trackServerSeq(seq: number): void {
    if (this.serverSeq !== null && seq !== ((this.serverSeq + 1) & 0xffff)) {
      this.anomalies.wireSeqGaps++;
      this.emit({
        kind: "anomaly",
        message: `server seq jumped ${this.serverSeq} -> ${seq}`,
      });
    }
    this.serverSeq = seq;
  }

  private trackTickGap(tick: number): void {
    const prev = this.snapshot?.tick ?? null;
    if (prev !== null) {
      const delta = tick - prev;
      if (delta > this.staleTickGap) {
        this.tickGapStale = true;
        this.emit({
          kind: "anomaly",
          message: `telemetry gap: tick ${prev} -> ${tick}`,
        });
      } else if (delta >= 0) {
        this.tickGapStale = false;
      }
    }
  }

  private mirrorLockFlag(snapshot: StateSnapshot): void {
    if (!this.lockHeld) return;
    if (snapshot.lockTaken) {
      this.lockConfirmedByState = true;
    } else if (this.lockConfirmedByState) {
      this.lockHeld = false;
      this.lockConfirmedByState = false;
      this.emit({ kind: "lock", held: false });
    }
  }

  private resolveAck(msg: AckNackMessage): void {
    const pending = this.pending.get(msg.ackSeq);
    if (pending === undefined) {
      this.anomalies.unexpectedAcks++;
      this.emit({
        kind: "anomaly",
        message: `ack for unknown seq ${msg.ackSeq}`,
      });
      return;
    }
    this.pending.delete(msg.ackSeq);
    const result: AckResult = {
      ok: msg.status === 0,
      status: msg.status,
      detail: msg.detail,
      statusName: statusName(msg.status),
      detailName: detailName(msg.detail),
    };
    const command = pending.command;
    if (result.ok && command.type === "lock") {
      const held = command.acquire;
      if (held !== this.lockHeld) {
        this.lockHeld = held;
        this.lockConfirmedByState = false;
        this.emit({ kind: "lock", held });
      }
    }
    pending.resolve(result);
    this.emit({ kind: "ack", seq: msg.ackSeq, command, result });
  }

  /**
   * Send one command; resolves with its ACK/NACK.
   *
   * Throws synchronously when disconnected or when a lock-gated command
   * is attempted without the lock (estop, heartbeat, and lock itself
   * are always allowed).
   */
  send(msg: CommandMessage): Promise<AckResult> {
    if (!this.connected || this.socket === null) {
      throw new SessionError("not connected");
    }
    if (requiresLock(msg) && !this.lockHeld) {
      throw new LockRequiredError();
    }
    const seq = this.seqCounter;
    this.seqCounter = (this.seqCounter + 1) & 0xffff;
    const frame = encodeFrame(msg, seq);
    const promise = new Promise<AckResult>((resolve, reject) => {
      this.pending.set(seq, { command: msg, resolve, reject });
    });
    this.socket.send(frame);
    return promise;
  }

  // Convenience wrappers matching the console controls.

  takeLock(): Promise<AckResult> {
    return this.send({ type: "lock", acquire: true });
  }

  releaseLock(): Promise<AckResult> {
    return this.send({ type: "lock", acquire: false });
  }

  estop(): Promise<AckResult> {
    return this.send({ type: "estop" });
  }

  drive(vLeftMmS: number, vRightMmS: number): Promise<AckResult> {
    return this.send({ type: "drive", vLeftMmS, vRightMmS });
  }

  stop(): Promise<AckResult> {
    return this.drive(0, 0);
  }

  setMode(extend: boolean): Promise<AckResult> {
    return this.send({ type: "mode", extend });
  }

  selectTool(kind: number): Promise<AckResult> {
    return this.send({ type: "toolSelect", kind });
  }

  stowTool(): Promise<AckResult> {
    return this.selectTool(TOOL_STOW);
  }

  moveTool(rMm: number, thetaCentideg: number, zMm: number): Promise<AckResult> {
    return this.send({ type: "toolMove", rMm, thetaCentideg, zMm });
  }

  inject(start: boolean): Promise<AckResult> {
    return this.send({ type: "inject", start });
  }

  clean(passes: number, brush: number): Promise<AckResult> {
    return this.send({ type: "clean", passes, brush });
  }

  spatula(): Promise<AckResult> {
    return this.send({ type: "spatula" });
  }

  loadCartridge(): Promise<AckResult> {
    return this.send({ type: "cartridgeLoad" });
  }

  /** Telemetry silence, wall-clock ms; null before the first STATE. */
  msSinceLastState(nowMs?: number): number | null {
    if (this.lastStateWallMs === null) return null;
    return (nowMs ?? this.now()) - this.lastStateWallMs;
  }

  /** Whether the stale-data banner should show. */
  isStale(nowMs?: number): boolean {
    if (this.tickGapStale) return true;
    const silence = this.msSinceLastState(nowMs);
    return silence !== null && silence > this.staleAfterMs;
  }
}

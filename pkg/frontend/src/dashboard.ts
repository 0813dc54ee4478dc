/**
 * View-model builders for the operator console.
 *
 * Every rendered value traces to a telemetry field — these functions
 * only reshape decoded messages for display and never fabricate state.
 * The canvas renderers at the bottom consume the view-models and hold
 * no logic of their own.
 */

import {
  EVENT_CARTRIDGE,
  EVENT_FAULT,
  EVENT_JOINT_DONE,
  EVENT_PHASE,
  EventMessage,
  JointMapMessage,
  MISSION_NAMES,
  MODE_NAMES,
  StateSnapshot,
  TOOL_NAMES,
  TOOL_STOW,
} from "./codec.js";
import { AckResult } from "./session.js";

export const MISSION_DRIVING = 0;
export const MISSION_ALIGNING = 1;
export const MISSION_EXTENDED_IDLE = 3;
export const MISSION_SEALING = 6;
export const MISSION_FAULT = 9;
export const MISSION_DONE = 10;

export const MODE_COMPRESSED = 0;
export const MODE_EXTENDED = 1;

export const TOOL_NOZZLE = 2;

// ---------------------------------------------------------------------------
// Badges and text lines.

export interface Badge {
  label: string;
  tone: "ok" | "busy" | "fault" | "done";
}

export function missionBadge(mission: number): Badge {
  const label = MISSION_NAMES[mission] ?? `MISSION_${mission}`;
  if (mission === MISSION_FAULT) return { label, tone: "fault" };
  if (mission === MISSION_DONE) return { label, tone: "done" };
  if (mission === MISSION_DRIVING || mission === MISSION_EXTENDED_IDLE) {
    return { label, tone: "ok" };
  }
  return { label, tone: "busy" };
}

export function modeLabel(mode: number): string {
  return MODE_NAMES[mode] ?? `MODE_${mode}`;
}

export function toolLabel(kind: number): string {
  return TOOL_NAMES[kind] ?? `TOOL_${kind}`;
}

/** The inline response line under the controls, e.g. "NACK: GATE_NOT_MET". */
export function ackLabel(result: AckResult): string {
  if (result.ok) return "ACK";
  if (result.detail !== 0) {
    return `NACK: ${result.statusName} (${result.detailName})`;
  }
  return `NACK: ${result.statusName}`;
}

export function eventLine(event: EventMessage): string {
  switch (event.code) {
    case EVENT_FAULT:
      return `FAULT #${event.detail}`;
    case EVENT_PHASE:
      return `PHASE → ${MISSION_NAMES[event.detail] ?? event.detail}`;
    case EVENT_JOINT_DONE:
      return `JOINT ${event.detail} DONE`;
    case EVENT_CARTRIDGE:
      return event.detail > 0
        ? `CARTRIDGE reload #${event.detail}`
        : "CARTRIDGE empty";
    default:
      return `EVENT ${event.code} (${event.detail})`;
  }
}

export interface BannerView {
  kind: "disconnected" | "stale";
  text: string;
}

/** Disconnect wins over staleness; null means no banner. */
export function bannerView(connected: boolean, stale: boolean): BannerView | null {
  if (!connected) {
    return { kind: "disconnected", text: "DISCONNECTED — reconnecting…" };
  }
  if (stale) {
    return { kind: "stale", text: "STALE DATA — telemetry gap > 1 s" };
  }
  return null;
}

// ---------------------------------------------------------------------------
// Control gating (the server interlocks mirrored in the UI).

export interface ControlsEnabled {
  lockToggle: boolean;
  estop: boolean;
  drive: boolean;
  extend: boolean;
  compress: boolean;
  toolSelect: boolean;
  toolMove: boolean;
  clean: boolean;
  injectStart: boolean;
  injectStop: boolean;
  spatula: boolean;
  cartridgeLoad: boolean;
}

export function controlsEnabled(
  snapshot: StateSnapshot | null,
  lockHeld: boolean,
  connected: boolean,
): ControlsEnabled {
  const none: ControlsEnabled = {
    lockToggle: connected,
    estop: connected,
    drive: false,
    extend: false,
    compress: false,
    toolSelect: false,
    toolMove: false,
    clean: false,
    injectStart: false,
    injectStop: false,
    spatula: false,
    cartridgeLoad: false,
  };
  if (!connected || snapshot === null || !lockHeld) return none;
  const m = snapshot.mission;
  const driving =
    snapshot.mode === MODE_COMPRESSED &&
    (m === MISSION_DRIVING || m === MISSION_ALIGNING);
  const idle = m === MISSION_EXTENDED_IDLE;
  const quietTool = idle && !snapshot.toolBusy;
  return {
    ...none,
    drive: driving,
    extend: driving,
    compress:
      quietTool && snapshot.toolKind === TOOL_STOW && !snapshot.armDeployed,
    toolSelect: quietTool,
    toolMove:
      (idle || m === MISSION_SEALING) && snapshot.armDeployed && !snapshot.toolBusy,
    clean: quietTool,
    injectStart: quietTool && snapshot.toolKind === TOOL_NOZZLE,
    injectStop: m === MISSION_SEALING,
    spatula: quietTool,
    cartridgeLoad: m !== MISSION_SEALING,
  };
}

// ---------------------------------------------------------------------------
// Cross-section: six legs plus the tool, viewed down the bore.

export interface LegView {
  angleDeg: number;
  extensionMm: number;
  forceN: number;
  loaded: boolean;
}

export interface CrossSectionView {
  legs: LegView[];
  extended: boolean;
  toolRMm: number;
  toolThetaDeg: number;
  toolZMm: number;
  toolKind: number;
  armDeployed: boolean;
  /** Display radius covering the longest leg, for normalization. */
  maxReachMm: number;
}

const BODY_RADIUS_MM = 250;
const WHEEL_RADIUS_MM = 50;

export function crossSectionView(snapshot: StateSnapshot): CrossSectionView {
  const legs = snapshot.legs.map((leg, i) => ({
    angleDeg: i * 60,
    extensionMm: leg.extensionMm,
    forceN: leg.forceN,
    loaded: leg.forceN > 0,
  }));
  const reach = Math.max(...legs.map((l) => l.extensionMm), snapshot.toolRMm - BODY_RADIUS_MM);
  return {
    legs,
    extended: snapshot.mode === MODE_EXTENDED,
    toolRMm: snapshot.toolRMm,
    toolThetaDeg: snapshot.toolThetaDeg,
    toolZMm: snapshot.toolZMm,
    toolKind: snapshot.toolKind,
    armDeployed: snapshot.armDeployed,
    maxReachMm: BODY_RADIUS_MM + WHEEL_RADIUS_MM + Math.max(reach, 0),
  };
}

// ---------------------------------------------------------------------------
// Pipe profile: robot position, discovered joints, sensor lookahead.

export interface JointMark {
  index: number;
  axialMm: number;
}

export interface ProfileView {
  axialMm: number;
  spanMm: number;
  robotFrac: number;
  sensorFrac: number | null;
  jointMarks: { index: number; frac: number }[];
}

export function profileView(
  snapshot: StateSnapshot,
  knownJoints: JointMark[],
): ProfileView {
  const sensorAhead =
    snapshot.sensorMm === null ? null : snapshot.axialMm + snapshot.sensorMm;
  let span = Math.max(snapshot.axialMm, sensorAhead ?? 0, 1000);
  for (const joint of knownJoints) span = Math.max(span, joint.axialMm);
  span *= 1.1;
  return {
    axialMm: snapshot.axialMm,
    spanMm: span,
    robotFrac: snapshot.axialMm / span,
    sensorFrac: sensorAhead === null ? null : sensorAhead / span,
    jointMarks: knownJoints.map((j) => ({ index: j.index, frac: j.axialMm / span })),
  };
}

// ---------------------------------------------------------------------------
// Sector ring: per-sector corrosion under seal coverage, 0-255 quantized.

export interface SectorView {
  startDeg: number;
  endDeg: number;
  /** 0-255; 255 = fully corroded. */
  corrosion: number;
  /** 0-255; 255 = bead complete in this sector. */
  coverage: number;
}

export interface SectorRingView {
  jointIndex: number;
  sectors: SectorView[];
  maxCorrosion: number;
  minCoverage: number;
}

export function sectorRingView(map: JointMapMessage): SectorRingView {
  const n = map.corrosion.length;
  const sectors: SectorView[] = [];
  let maxCorrosion = 0;
  let minCoverage = n > 0 ? 255 : 0;
  for (let i = 0; i < n; i++) {
    const corrosion = map.corrosion[i]!;
    const coverage = map.coverage[i]!;
    maxCorrosion = Math.max(maxCorrosion, corrosion);
    minCoverage = Math.min(minCoverage, coverage);
    sectors.push({
      startDeg: (360 * i) / n,
      endDeg: (360 * (i + 1)) / n,
      corrosion,
      coverage,
    });
  }
  return { jointIndex: map.jointIndex, sectors, maxCorrosion, minCoverage };
}

// ---------------------------------------------------------------------------
// Cartridge gauge.

export interface GaugeView {
  fillMm3: number;
  capacityMm3: number;
  fraction: number;
}

/**
 * The wire carries the fill only; the largest fill ever seen serves as
 * the capacity estimate (a cartridge load fills to capacity).
 */
export function gaugeView(fillMm3: number, maxSeenMm3: number): GaugeView {
  const capacity = Math.max(maxSeenMm3, fillMm3, 1);
  return { fillMm3, capacityMm3: capacity, fraction: fillMm3 / capacity };
}

// ---------------------------------------------------------------------------
// Canvas renderers (thin; no logic beyond drawing the view-models).

export function renderCrossSection(
  ctx: CanvasRenderingContext2D,
  w: number,
  h: number,
  view: CrossSectionView,
): void {
  ctx.clearRect(0, 0, w, h);
  const cx = w / 2;
  const cy = h / 2;
  const scale = (Math.min(w, h) / 2 - 8) / view.maxReachMm;
  ctx.strokeStyle = "#556";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.arc(cx, cy, view.maxReachMm * scale, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.fillStyle = "#223";
  ctx.beginPath();
  ctx.arc(cx, cy, BODY_RADIUS_MM * scale, 0, 2 * Math.PI);
  ctx.fill();
  for (const leg of view.legs) {
    const a = (leg.angleDeg * Math.PI) / 180;
    const r0 = BODY_RADIUS_MM * scale;
    const r1 = (BODY_RADIUS_MM + leg.extensionMm + WHEEL_RADIUS_MM) * scale;
    ctx.strokeStyle = leg.loaded ? "#4c4" : "#888";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(cx + r0 * Math.cos(a), cy + r0 * Math.sin(a));
    ctx.lineTo(cx + r1 * Math.cos(a), cy + r1 * Math.sin(a));
    ctx.stroke();
    ctx.fillStyle = leg.loaded ? "#4c4" : "#888";
    ctx.beginPath();
    ctx.arc(cx + r1 * Math.cos(a), cy + r1 * Math.sin(a), 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  if (view.armDeployed) {
    const a = (view.toolThetaDeg * Math.PI) / 180;
    const r = view.toolRMm * scale;
    ctx.strokeStyle = "#fa0";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + r * Math.cos(a), cy + r * Math.sin(a));
    ctx.stroke();
  }
}

export function renderProfile(
  ctx: CanvasRenderingContext2D,
  w: number,
  h: number,
  view: ProfileView,
): void {
  ctx.clearRect(0, 0, w, h);
  const y = h / 2;
  ctx.strokeStyle = "#556";
  ctx.lineWidth = 1;
  ctx.strokeRect(4, y - 10, w - 8, 20);
  for (const mark of view.jointMarks) {
    const x = 4 + mark.frac * (w - 8);
    ctx.strokeStyle = "#fa0";
    ctx.beginPath();
    ctx.moveTo(x, y - 10);
    ctx.lineTo(x, y + 10);
    ctx.stroke();
  }
  if (view.sensorFrac !== null) {
    const x = 4 + view.sensorFrac * (w - 8);
    ctx.strokeStyle = "#08f";
    ctx.setLineDash([3, 3]);
    ctx.beginPath();
    ctx.moveTo(x, y - 14);
    ctx.lineTo(x, y + 14);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  const rx = 4 + view.robotFrac * (w - 8);
  ctx.fillStyle = "#4c4";
  ctx.fillRect(rx - 5, y - 6, 10, 12);
}

export function renderSectorRing(
  ctx: CanvasRenderingContext2D,
  w: number,
  h: number,
  view: SectorRingView,
): void {
  ctx.clearRect(0, 0, w, h);
  const cx = w / 2;
  const cy = h / 2;
  const rOuter = Math.min(w, h) / 2 - 4;
  const rMid = rOuter * 0.78;
  const rInner = rOuter * 0.56;
  for (const sector of view.sectors) {
    const a0 = (sector.startDeg * Math.PI) / 180;
    const a1 = (sector.endDeg * Math.PI) / 180;
    // Outer band: corrosion (dark red = fully corroded, pale = clean).
    ctx.fillStyle = `rgb(${80 + (sector.corrosion * 175) / 255}, ${
      200 - (sector.corrosion * 160) / 255
    }, 60)`;
    ctx.beginPath();
    ctx.arc(cx, cy, rOuter, a0, a1);
    ctx.arc(cx, cy, rMid, a1, a0, true);
    ctx.closePath();
    ctx.fill();
    // Inner band: seal coverage (grey = none, teal = complete).
    ctx.fillStyle = `rgb(40, ${60 + (sector.coverage * 140) / 255}, ${
      70 + (sector.coverage * 130) / 255
    })`;
    ctx.beginPath();
    ctx.arc(cx, cy, rMid, a0, a1);
    ctx.arc(cx, cy, rInner, a1, a0, true);
    ctx.closePath();
    ctx.fill();
  }
}

export function renderGauge(
  ctx: CanvasRenderingContext2D,
  w: number,
  h: number,
  view: GaugeView,
): void {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#556";
  ctx.strokeRect(2, 2, w - 4, h - 4);
  ctx.fillStyle = view.fraction > 0.15 ? "#4c4" : "#c44";
  ctx.fillRect(3, 3, (w - 6) * Math.max(0, Math.min(1, view.fraction)), h - 6);
}

/**
 * Console page bootstrap: one session, one render loop.
 *
 * Socket messages update the session's latest snapshot; the
 * requestAnimationFrame loop renders from that snapshot only, so a slow
 * frame never queues stale work.
 */

import {
  EVENT_FAULT,
  EVENT_PHASE,
  JointMapMessage,
  TOOL_STOW,
} from "./codec.js";
import { stepValue, wireKeyboard, wrapCentideg } from "./controls.js";
import {
  ackLabel,
  bannerView,
  controlsEnabled,
  crossSectionView,
  eventLine,
  gaugeView,
  missionBadge,
  modeLabel,
  profileView,
  renderCrossSection,
  renderGauge,
  renderProfile,
  renderSectorRing,
  sectorRingView,
  toolLabel,
  JointMark,
} from "./dashboard.js";
import { AckResult, ConsoleSession, LockRequiredError } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function canvasCtx(id: string): [HTMLCanvasElement, CanvasRenderingContext2D] {
  const canvas = el<HTMLCanvasElement>(id);
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error(`no 2d context on #${id}`);
  return [canvas, ctx];
}

export function bootConsole(): void {
  const bridgeUrl = `ws://${location.hostname || "127.0.0.1"}:4858`;
  const session = new ConsoleSession({ url: bridgeUrl });

  const [profileCanvas, profileCtx] = canvasCtx("profile");
  const [sectionCanvas, sectionCtx] = canvasCtx("section");
  const [ringCanvas, ringCtx] = canvasCtx("ring");
  const [gaugeCanvas, gaugeCtx] = canvasCtx("gauge");

  const banner = el<HTMLDivElement>("banner");
  const badge = el<HTMLSpanElement>("mission-badge");
  const modeSpan = el<HTMLSpanElement>("mode");
  const toolSpan = el<HTMLSpanElement>("tool");
  const tickSpan = el<HTMLSpanElement>("tick");
  const axialSpan = el<HTMLSpanElement>("axial");
  const ackLine = el<HTMLDivElement>("ack-line");
  const eventList = el<HTMLUListElement>("events");
  const ringTitle = el<HTMLDivElement>("ring-title");

  const lockBtn = el<HTMLButtonElement>("lock");
  const estopBtn = el<HTMLButtonElement>("estop");
  const extendBtn = el<HTMLButtonElement>("extend");
  const compressBtn = el<HTMLButtonElement>("compress");
  const stopBtn = el<HTMLButtonElement>("stop");
  const cleanBtn = el<HTMLButtonElement>("clean");
  const injectBtn = el<HTMLButtonElement>("inject");
  const spatulaBtn = el<HTMLButtonElement>("spatula");
  const stowBtn = el<HTMLButtonElement>("stow");
  const reloadBtn = el<HTMLButtonElement>("reload");
  const toolButtons: [HTMLButtonElement, number][] = [
    [el<HTMLButtonElement>("tool-brush-straight"), 0],
    [el<HTMLButtonElement>("tool-brush-tapered"), 1],
    [el<HTMLButtonElement>("tool-nozzle"), 2],
    [el<HTMLButtonElement>("tool-spatula"), 3],
  ];
  const driveLeft = el<HTMLInputElement>("drive-left");
  const driveRight = el<HTMLInputElement>("drive-right");

  // Discovered joints: first sector map for an index pins it at the
  // robot's press position.
  const knownJoints = new Map<number, JointMark>();
  let maxCartridgeSeen = 1;
  let activeMap: JointMapMessage | null = null;

  const showAck = (promise: Promise<AckResult>): void => {
    promise
      .then((result) => {
        ackLine.textContent = ackLabel(result);
        ackLine.dataset["ok"] = result.ok ? "yes" : "no";
      })
      .catch((err: Error) => {
        ackLine.textContent = err.message;
        ackLine.dataset["ok"] = "no";
      });
  };

  const guarded = (fn: () => Promise<AckResult>): void => {
    try {
      showAck(fn());
    } catch (err) {
      if (err instanceof LockRequiredError) {
        ackLine.textContent = "refused locally: take the operator lock first";
        ackLine.dataset["ok"] = "no";
      } else {
        ackLine.textContent = (err as Error).message;
        ackLine.dataset["ok"] = "no";
      }
    }
  };

  lockBtn.addEventListener("click", () => {
    guarded(() => (session.lockHeld ? session.releaseLock() : session.takeLock()));
  });
  estopBtn.addEventListener("click", () => guarded(() => session.estop()));
  extendBtn.addEventListener("click", () => guarded(() => session.setMode(true)));
  compressBtn.addEventListener("click", () => guarded(() => session.setMode(false)));
  stopBtn.addEventListener("click", () => guarded(() => session.stop()));
  cleanBtn.addEventListener("click", () => {
    const passes = Number(el<HTMLInputElement>("clean-passes").value) || 1;
    const brush = Number(el<HTMLSelectElement>("clean-brush").value) || 0;
    guarded(() => session.clean(passes, brush));
  });
  injectBtn.addEventListener("click", () => {
    const sealing = session.snapshot?.mission === 6;
    guarded(() => session.inject(!sealing));
  });
  spatulaBtn.addEventListener("click", () => guarded(() => session.spatula()));
  stowBtn.addEventListener("click", () => guarded(() => session.stowTool()));
  reloadBtn.addEventListener("click", () => guarded(() => session.loadCartridge()));
  for (const [button, kind] of toolButtons) {
    button.addEventListener("click", () => guarded(() => session.selectTool(kind)));
  }

  const jog = (dr: number, dthetaCd: number, dz: number): void => {
    const snap = session.snapshot;
    if (snap === null) return;
    const r = stepValue(Math.round(snap.toolRMm + dr), 0, 350, 620);
    const theta = wrapCentideg(Math.round(snap.toolThetaDeg * 100) + dthetaCd);
    const z = stepValue(Math.round(snap.toolZMm + dz), 0, -150, 150);
    guarded(() => session.moveTool(r, theta, z));
  };
  el<HTMLButtonElement>("jog-r-plus").addEventListener("click", () => jog(10, 0, 0));
  el<HTMLButtonElement>("jog-r-minus").addEventListener("click", () => jog(-10, 0, 0));
  el<HTMLButtonElement>("jog-t-plus").addEventListener("click", () => jog(0, 500, 0));
  el<HTMLButtonElement>("jog-t-minus").addEventListener("click", () => jog(0, -500, 0));
  el<HTMLButtonElement>("jog-z-plus").addEventListener("click", () => jog(0, 0, 5));
  el<HTMLButtonElement>("jog-z-minus").addEventListener("click", () => jog(0, 0, -5));

  const sendSliderDrive = (): void => {
    guarded(() => session.drive(Number(driveLeft.value), Number(driveRight.value)));
  };
  driveLeft.addEventListener("change", sendSliderDrive);
  driveRight.addEventListener("change", sendSliderDrive);

  wireKeyboard(document, session, () => {
    ackLine.textContent = "refused locally: take the operator lock first";
    ackLine.dataset["ok"] = "no";
  });

  session.on((event) => {
    switch (event.kind) {
      case "jointMap": {
        if (!knownJoints.has(event.map.jointIndex) && session.snapshot !== null) {
          knownJoints.set(event.map.jointIndex, {
            index: event.map.jointIndex,
            axialMm: session.snapshot.axialMm,
          });
        }
        activeMap = event.map;
        break;
      }
      case "event": {
        const item = document.createElement("li");
        item.textContent = eventLine(event.event);
        if (event.event.code === EVENT_FAULT) item.dataset["fault"] = "yes";
        if (event.event.code === EVENT_PHASE) item.dataset["phase"] = "yes";
        eventList.prepend(item);
        while (eventList.childElementCount > 30) {
          eventList.lastElementChild?.remove();
        }
        break;
      }
      case "ack":
        break;
      case "lock":
        lockBtn.textContent = event.held ? "Release lock" : "Take lock";
        break;
      default:
        break;
    }
  });

  const render = (): void => {
    const snap = session.snapshot;
    const bannerState = bannerView(session.connected, session.isStale());
    banner.textContent = bannerState?.text ?? "";
    banner.dataset["kind"] = bannerState?.kind ?? "none";

    if (snap !== null) {
      const mission = missionBadge(snap.mission);
      badge.textContent = mission.label;
      badge.dataset["tone"] = mission.tone;
      modeSpan.textContent = modeLabel(snap.mode);
      toolSpan.textContent = toolLabel(snap.toolKind);
      tickSpan.textContent = String(snap.tick);
      axialSpan.textContent = `${snap.axialMm.toFixed(0)} mm`;

      maxCartridgeSeen = Math.max(maxCartridgeSeen, snap.cartridgeMm3);
      renderProfile(
        profileCtx,
        profileCanvas.width,
        profileCanvas.height,
        profileView(snap, [...knownJoints.values()]),
      );
      renderCrossSection(
        sectionCtx,
        sectionCanvas.width,
        sectionCanvas.height,
        crossSectionView(snap),
      );
      renderGauge(
        gaugeCtx,
        gaugeCanvas.width,
        gaugeCanvas.height,
        gaugeView(snap.cartridgeMm3, maxCartridgeSeen),
      );

      const enabled = controlsEnabled(snap, session.lockHeld, session.connected);
      driveLeft.disabled = !enabled.drive;
      driveRight.disabled = !enabled.drive;
      stopBtn.disabled = !enabled.drive;
      extendBtn.disabled = !enabled.extend;
      compressBtn.disabled = !enabled.compress;
      cleanBtn.disabled = !enabled.clean;
      injectBtn.disabled = !(enabled.injectStart || enabled.injectStop);
      injectBtn.textContent = enabled.injectStop ? "Stop inject" : "Inject";
      spatulaBtn.disabled = !enabled.spatula;
      stowBtn.disabled = !enabled.toolSelect || snap.toolKind === TOOL_STOW;
      reloadBtn.disabled = !enabled.cartridgeLoad;
      estopBtn.disabled = !enabled.estop;
      lockBtn.disabled = !enabled.lockToggle;
      for (const [button] of toolButtons) button.disabled = !enabled.toolSelect;
    }

    if (activeMap !== null) {
      const ring = sectorRingView(activeMap);
      ringTitle.textContent =
        `joint ${ring.jointIndex} — worst corrosion ${ring.maxCorrosion}, ` +
        `min coverage ${ring.minCoverage}`;
      renderSectorRing(ringCtx, ringCanvas.width, ringCanvas.height, ring);
    }
    requestAnimationFrame(render);
  };

  session.connect();
  requestAnimationFrame(render);
}

bootConsole();

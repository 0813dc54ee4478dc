/**
 * Operator input mapping: keyboard teleoperation plus the button/stepper
 * wiring used by the console page.  The pure key-mapping lives here so
 * it can be tested without a DOM.
 */

import { ConsoleSession, LockRequiredError } from "./session.js";

/** Default commanded wheel speed for keyboard driving, mm/s. */
export const KEY_CRUISE_MM_S = 200;

export interface WheelSpeeds {
  vLeftMmS: number;
  vRightMmS: number;
}

/**
 * Map the set of held drive keys to wheel speeds.
 *
 * Forward/back drive both wheels; adding left/right slows the inner
 * wheel to veer; left/right alone spin in place.  An empty set stops.
 */
export function keysToDrive(
  keys: ReadonlySet<string>,
  cruiseMmS: number = KEY_CRUISE_MM_S,
): WheelSpeeds {
  const up = keys.has("ArrowUp") || keys.has("w");
  const down = keys.has("ArrowDown") || keys.has("s");
  const left = keys.has("ArrowLeft") || keys.has("a");
  const right = keys.has("ArrowRight") || keys.has("d");
  let axis = 0;
  if (up) axis += 1;
  if (down) axis -= 1;
  if (axis !== 0) {
    const v = axis * cruiseMmS;
    if (left && !right) return { vLeftMmS: Math.round(v / 2), vRightMmS: v };
    if (right && !left) return { vLeftMmS: v, vRightMmS: Math.round(v / 2) };
    return { vLeftMmS: v, vRightMmS: v };
  }
  const spin = Math.round(0.3 * cruiseMmS);
  if (left && !right) return { vLeftMmS: -spin, vRightMmS: spin };
  if (right && !left) return { vLeftMmS: spin, vRightMmS: -spin };
  return { vLeftMmS: 0, vRightMmS: 0 };
}

const DRIVE_KEYS = new Set([
  "ArrowUp",
  "ArrowDown",
  "ArrowLeft",
  "ArrowRight",
  "w",
  "a",
  "s",
  "d",
]);

/**
 * Attach keyboard teleoperation to a document: drive keys re-send DRIVE
 * on every change, space stops, Escape fires the ESTOP (which needs no
 * lock).  Returns a detach function.
 */
export function wireKeyboard(
  doc: Document,
  session: ConsoleSession,
  onRefused?: (err: Error) => void,
): () => void {
  const held = new Set<string>();

  const push = (speeds: WheelSpeeds): void => {
    try {
      void session.drive(speeds.vLeftMmS, speeds.vRightMmS).catch(() => undefined);
    } catch (err) {
      if (err instanceof LockRequiredError && onRefused) onRefused(err);
    }
  };

  const onKeyDown = (ev: KeyboardEvent): void => {
    if (ev.key === "Escape") {
      try {
        void session.estop().catch(() => undefined);
      } catch {
        /* not connected */
      }
      return;
    }
    if (ev.key === " ") {
      held.clear();
      push({ vLeftMmS: 0, vRightMmS: 0 });
      return;
    }
    if (!DRIVE_KEYS.has(ev.key) || held.has(ev.key)) return;
    held.add(ev.key);
    push(keysToDrive(held));
  };

  const onKeyUp = (ev: KeyboardEvent): void => {
    if (!DRIVE_KEYS.has(ev.key)) return;
    held.delete(ev.key);
    push(keysToDrive(held));
  };

  doc.addEventListener("keydown", onKeyDown);
  doc.addEventListener("keyup", onKeyUp);
  return () => {
    doc.removeEventListener("keydown", onKeyDown);
    doc.removeEventListener("keyup", onKeyUp);
  };
}

/** Clamp-and-step helper for the tool jog steppers. */
export function stepValue(
  current: number,
  delta: number,
  lo: number,
  hi: number,
): number {
  return Math.max(lo, Math.min(hi, current + delta));
}

/** Wrap a centidegree jog into the wire's [0, 35999] range. */
export function wrapCentideg(value: number): number {
  // Double modulo also normalizes -0 (e.g. -36000) to +0.
  return ((value % 36000) + 36000) % 36000;
}

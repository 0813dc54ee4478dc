import { describe, expect, it } from "vitest";

import { KEY_CRUISE_MM_S, keysToDrive, stepValue, wrapCentideg } from "../src/controls.js";

const keys = (...held: string[]): Set<string> => new Set(held);

describe("keysToDrive", () => {
  it("stops with nothing held", () => {
    expect(keysToDrive(keys())).toEqual({ vLeftMmS: 0, vRightMmS: 0 });
  });

  it("drives straight forward and back at cruise speed", () => {
    expect(keysToDrive(keys("ArrowUp"))).toEqual({
      vLeftMmS: KEY_CRUISE_MM_S,
      vRightMmS: KEY_CRUISE_MM_S,
    });
    expect(keysToDrive(keys("s"))).toEqual({
      vLeftMmS: -KEY_CRUISE_MM_S,
      vRightMmS: -KEY_CRUISE_MM_S,
    });
  });

  it("cancels opposing axis keys", () => {
    expect(keysToDrive(keys("w", "s"))).toEqual({ vLeftMmS: 0, vRightMmS: 0 });
  });

  it("veers by slowing the inner wheel", () => {
    expect(keysToDrive(keys("ArrowUp", "ArrowLeft"), 200)).toEqual({
      vLeftMmS: 100,
      vRightMmS: 200,
    });
    expect(keysToDrive(keys("w", "d"), 200)).toEqual({
      vLeftMmS: 200,
      vRightMmS: 100,
    });
  });

  it("spins in place on left/right alone", () => {
    expect(keysToDrive(keys("ArrowLeft"), 200)).toEqual({
      vLeftMmS: -60,
      vRightMmS: 60,
    });
    expect(keysToDrive(keys("d"), 200)).toEqual({ vLeftMmS: 60, vRightMmS: -60 });
  });

  it("treats arrows and wasd identically", () => {
    expect(keysToDrive(keys("w"))).toEqual(keysToDrive(keys("ArrowUp")));
    expect(keysToDrive(keys("a"))).toEqual(keysToDrive(keys("ArrowLeft")));
  });
});

describe("jog helpers", () => {
  it("clamps the tool radius step to the workspace", () => {
    expect(stepValue(470 + 10, 0, 350, 620)).toBe(480);
    expect(stepValue(615 + 10, 0, 350, 620)).toBe(620);
    expect(stepValue(355 - 10, 0, 350, 620)).toBe(350);
  });

  it("steps with an explicit delta", () => {
    expect(stepValue(0, -5, -150, 150)).toBe(-5);
    expect(stepValue(-149, -5, -150, 150)).toBe(-150);
  });

  it("wraps theta jogs into [0, 35999]", () => {
    expect(wrapCentideg(0)).toBe(0);
    expect(wrapCentideg(35999)).toBe(35999);
    expect(wrapCentideg(36000)).toBe(0);
    expect(wrapCentideg(36500)).toBe(500);
    expect(wrapCentideg(-500)).toBe(35500);
    expect(wrapCentideg(-36000)).toBe(0);
  });
});

import { describe, expect, it } from "vitest";

import { scaleBox, viewportScale } from "../src/overlay.js";

describe("overlay scaling", () => {
  it("scales a box by 2x on a doubled viewport", () => {
    const scale = viewportScale({ width: 320, height: 240 }, { width: 640, height: 480 });
    const box = scaleBox({ x: 10, y: 20, w: 30, h: 40, score: 0.9, label: "s" }, scale);
    expect([box.x, box.y, box.w, box.h]).toEqual([20, 40, 60, 80]);
  });

  it("handles anisotropic viewports", () => {
    const scale = viewportScale({ width: 100, height: 100 }, { width: 300, height: 150 });
    const box = scaleBox({ x: 10, y: 10, w: 10, h: 10, score: 1, label: "s" }, scale);
    expect([box.x, box.y, box.w, box.h]).toEqual([30, 15, 30, 15]);
  });

  it("identity scale leaves boxes untouched", () => {
    const scale = viewportScale({ width: 64, height: 48 }, { width: 64, height: 48 });
    const det = { x: 4, y: 3, w: 20, h: 15, score: 0.5, label: "s" };
    expect(scaleBox(det, scale)).toEqual(det);
  });
});

import { describe, expect, it } from "vitest";
import { Palette } from "../src/palette.js";
import type { ClassInfo } from "../src/types.js";

// shaped like the /classes payload: UNLABELED, nine 3D classes, two image-only
const CLASSES: ClassInfo[] = [
  { id: 0, name: "UNLABELED", is_3d: true, color: [0, 0, 0] },
  { id: 1, name: "ON_TRACKS", is_3d: true, color: [255, 120, 30] },
  { id: 2, name: "PERSON", is_3d: true, color: [220, 20, 60] },
  { id: 3, name: "RAIL_TRACK", is_3d: true, color: [90, 90, 200] },
  { id: 4, name: "TRACKBED", is_3d: true, color: [140, 110, 80] },
  { id: 5, name: "CONSTRUCTION", is_3d: true, color: [250, 230, 80] },
  { id: 6, name: "POLE", is_3d: true, color: [160, 160, 160] },
  { id: 7, name: "SIGN", is_3d: true, color: [255, 0, 255] },
  { id: 8, name: "VEGETATION", is_3d: true, color: [60, 180, 75] },
  { id: 9, name: "TERRAIN", is_3d: true, color: [170, 140, 60] },
  { id: 10, name: "SKY", is_3d: false, color: [70, 130, 230] },
  { id: 11, name: "BACKGROUND", is_3d: false, color: [40, 40, 40] },
];

describe("Palette", () => {
  it("serves colors only for declared ids", () => {
    const p = new Palette(CLASSES);
    expect(p.get(2).name).toBe("PERSON");
    expect(p.cssColor(8)).toBe("rgb(60, 180, 75)");
    expect(() => p.get(12)).toThrow(/unknown class id 12/);
    expect(() => p.get(-1)).toThrow(/unknown class id/);
  });

  it("rejects duplicate or empty class lists", () => {
    expect(() => new Palette([])).toThrow(/empty/);
    expect(() => new Palette([CLASSES[0], CLASSES[0]])).toThrow(/duplicate/);
  });

  it("paintable set is the 3D classes (UNLABELED included), never image-only", () => {
    const p = new Palette(CLASSES);
    const ids = p.paintable().map((c) => c.id);
    expect(ids).toEqual([0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
  });

  it("colorize maps a 9-class scan to 9 distinct colors", () => {
    const p = new Palette(CLASSES);
    const labels = [1, 2, 3, 4, 5, 6, 7, 8, 9, 1, 2, 3];
    const colors = p.colorize(labels);
    expect(colors.length).toBe(labels.length * 3);
    const distinct = new Set<string>();
    for (let i = 0; i < labels.length; i++) {
      distinct.add(colors.slice(i * 3, i * 3 + 3).join(","));
    }
    expect(distinct.size).toBe(new Set(labels).size);
    expect(distinct.size).toBe(9);
  });

  it("colorize of an all-UNLABELED scan is a single color", () => {
    const p = new Palette(CLASSES);
    const colors = p.colorize(new Uint16Array(40));
    const first = colors.slice(0, 3).join(",");
    for (let i = 0; i < 40; i++) {
      expect(colors.slice(i * 3, i * 3 + 3).join(",")).toBe(first);
    }
  });

  it("colorize reuses a matching output buffer", () => {
    const p = new Palette(CLASSES);
    const out = new Float32Array(9);
    expect(p.colorize([1, 2, 3], out)).toBe(out);
    expect(p.colorize([1, 2], out)).not.toBe(out);
  });
});

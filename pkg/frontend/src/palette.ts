/** Class palette built from the /classes payload.
 *
 * The server is the only source of class ids; nothing here hardcodes a
 * taxonomy. Lookups by unknown id throw instead of inventing a color.
 */

import type { ClassInfo } from "./types.js";

export class Palette {
  private byId = new Map<number, ClassInfo>();

  constructor(classes: ClassInfo[]) {
    if (classes.length === 0) throw new Error("empty class list");
    for (const c of classes) {
      if (this.byId.has(c.id)) throw new Error(`duplicate class id ${c.id}`);
      this.byId.set(c.id, c);
    }
  }

  get(id: number): ClassInfo {
    const c = this.byId.get(id);
    if (!c) throw new Error(`unknown class id ${id}`);
    return c;
  }

  has(id: number): boolean {
    return this.byId.has(id);
  }

  /** Classes a point may legally carry: UNLABELED plus the 3D classes. */
  paintable(): ClassInfo[] {
    return [...this.byId.values()].filter((c) => c.is_3d || c.name === "UNLABELED");
  }

  all(): ClassInfo[] {
    return [...this.byId.values()];
  }

  /** RGB in [0, 1] for a color buffer, one triple per label. */
  colorize(labels: ArrayLike<number>, out?: Float32Array): Float32Array {
    const n = labels.length;
    const colors = out && out.length === n * 3 ? out : new Float32Array(n * 3);
    for (let i = 0; i < n; i++) {
      const [r, g, b] = this.get(labels[i]).color;
      colors[i * 3] = r / 255;
      colors[i * 3 + 1] = g / 255;
      colors[i * 3 + 2] = b / 255;
    }
    return colors;
  }

  cssColor(id: number): string {
    const [r, g, b] = this.get(id).color;
    return `rgb(${r}, ${g}, ${b})`;
  }
}

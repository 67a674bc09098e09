/** Screen-space point selection: rectangle and lasso.
 *
 * Both operate on projected 2D point coordinates. Points exactly on a
 * rectangle border count as inside; lasso containment is the even-odd
 * rule over the closed polygon.
 */

export interface Pt {
  x: number;
  y: number;
}

export interface Rect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export function normalizeRect(r: Rect): Rect {
  return {
    x0: Math.min(r.x0, r.x1),
    y0: Math.min(r.y0, r.y1),
    x1: Math.max(r.x0, r.x1),
    y1: Math.max(r.y0, r.y1),
  };
}

export function insideRect(p: Pt, r: Rect): boolean {
  const n = normalizeRect(r);
  return p.x >= n.x0 && p.x <= n.x1 && p.y >= n.y0 && p.y <= n.y1;
}

export function insidePolygon(p: Pt, poly: Pt[]): boolean {
  if (poly.length < 3) return false;
  let inside = false;
  for (let i = 0, j = poly.length - 1; i < poly.length; j = i++) {
    const a = poly[i];
    const b = poly[j];
    const crosses =
      a.y > p.y !== b.y > p.y &&
      p.x < ((b.x - a.x) * (p.y - a.y)) / (b.y - a.y) + a.x;
    if (crosses) inside = !inside;
  }
  return inside;
}

/** Indices of projected points (x, y interleaved) inside the rectangle.
 * NaN coordinates mark points behind the camera and never match. */
export function pickRect(screen: Float32Array, r: Rect): number[] {
  const n = normalizeRect(r);
  const out: number[] = [];
  for (let i = 0; i * 2 < screen.length; i++) {
    const x = screen[i * 2];
    const y = screen[i * 2 + 1];
    if (x >= n.x0 && x <= n.x1 && y >= n.y0 && y <= n.y1) out.push(i);
  }
  return out;
}

export function pickLasso(screen: Float32Array, poly: Pt[]): number[] {
  if (poly.length < 3) return [];
  // cheap reject box before the even-odd test
  let bx0 = Infinity, by0 = Infinity, bx1 = -Infinity, by1 = -Infinity;
  for (const p of poly) {
    bx0 = Math.min(bx0, p.x);
    by0 = Math.min(by0, p.y);
    bx1 = Math.max(bx1, p.x);
    by1 = Math.max(by1, p.y);
  }
  const out: number[] = [];
  for (let i = 0; i * 2 < screen.length; i++) {
    const x = screen[i * 2];
    const y = screen[i * 2 + 1];
    if (x < bx0 || x > bx1 || y < by0 || y > by1) continue;
    if (insidePolygon({ x, y }, poly)) out.push(i);
  }
  return out;
}

/** Client-side decoding of the binary point stream.
 *
 * One point is a 20-byte little-endian record of five float32 values:
 * x, y, z, intensity, t_rel. The stream is just records back to back,
 * so the byte length must be a multiple of 20.
 */

export const RECORD_BYTES = 20;

export interface DecodedCloud {
  count: number;
  /** xyz triplets, length 3 * count */
  positions: Float32Array;
  intensity: Float32Array;
  tRel: Float32Array;
}

export function decodePoints(buf: ArrayBuffer): DecodedCloud {
  if (buf.byteLength % RECORD_BYTES !== 0) {
    throw new Error(
      `point stream is ${buf.byteLength} bytes, not a multiple of ${RECORD_BYTES}`,
    );
  }
  const count = buf.byteLength / RECORD_BYTES;
  const dv = new DataView(buf);
  const positions = new Float32Array(count * 3);
  const intensity = new Float32Array(count);
  const tRel = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    const off = i * RECORD_BYTES;
    positions[i * 3] = dv.getFloat32(off, true);
    positions[i * 3 + 1] = dv.getFloat32(off + 4, true);
    positions[i * 3 + 2] = dv.getFloat32(off + 8, true);
    intensity[i] = dv.getFloat32(off + 12, true);
    tRel[i] = dv.getFloat32(off + 16, true);
  }
  return { count, positions, intensity, tRel };
}

/** Inverse of decodePoints, used by tests to fabricate streams. */
export function encodePoints(cloud: DecodedCloud): ArrayBuffer {
  const buf = new ArrayBuffer(cloud.count * RECORD_BYTES);
  const dv = new DataView(buf);
  for (let i = 0; i < cloud.count; i++) {
    const off = i * RECORD_BYTES;
    dv.setFloat32(off, cloud.positions[i * 3], true);
    dv.setFloat32(off + 4, cloud.positions[i * 3 + 1], true);
    dv.setFloat32(off + 8, cloud.positions[i * 3 + 2], true);
    dv.setFloat32(off + 12, cloud.intensity[i], true);
    dv.setFloat32(off + 16, cloud.tRel[i], true);
  }
  return buf;
}

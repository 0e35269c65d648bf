/** Slice decoding and plane geometry helpers. */

import type { SliceMsg } from "./protocol.js";

export const SLICE_PLANES = ["xy", "xz", "yz"] as const;
export type SlicePlane = (typeof SLICE_PLANES)[number];

const AXES: Record<SlicePlane, [number, number]> = {
  xy: [0, 1],
  xz: [0, 2],
  yz: [1, 2],
};

/** World axes spanned by a slice plane, in render order (width, height). */
export function planeAxes(plane: string): [number, number] {
  const axes = AXES[plane as SlicePlane];
  if (!axes) throw new Error(`unknown slice plane ${plane}`);
  return axes;
}

/** The world axis normal to a slice plane. */
export function axialAxis(plane: string): number {
  const [a, b] = planeAxes(plane);
  return 3 - a - b;
}

const B64 =
  "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
const B64_REV: Record<string, number> = {};
for (let i = 0; i < B64.length; i++) B64_REV[B64[i]!] = i;

/** Base64 to bytes without atob/Buffer so the module runs anywhere. */
export function decodeBase64(s: string): Uint8Array {
  const clean = s.replace(/=+$/, "");
  const out = new Uint8Array(Math.floor((clean.length * 3) / 4));
  let acc = 0;
  let bits = 0;
  let k = 0;
  for (const ch of clean) {
    const v = B64_REV[ch];
    if (v === undefined) throw new Error("invalid base64 character");
    acc = (acc << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out[k++] = (acc >> bits) & 0xff;
    }
  }
  return out;
}

/** Label grid of a slice message, row-major [shape[0]][shape[1]]. */
export function decodeLabels(msg: SliceMsg): Uint8Array {
  const labels = decodeBase64(msg.labels_b64);
  const expect = msg.shape.reduce((a, b) => a * b, 1);
  if (labels.length !== expect) {
    throw new Error(`slice payload ${labels.length} != shape product ${expect}`);
  }
  return labels;
}

/** Structure label colors (0 is empty space). */
export const PALETTE: Record<number, [number, number, number]> = {
  0: [16, 16, 20],
  1: [235, 200, 60],
  2: [90, 160, 235],
  3: [150, 90, 200],
  4: [220, 220, 215],
  5: [160, 150, 135],
};

/** Map a world point onto slice pixel coordinates (fractional), or null
 * when the point projects outside the slice rectangle. */
export function tipToSliceCoords(
  tip_mm: number[],
  msg: SliceMsg,
): [number, number] | null {
  const [ax0, ax1] = planeAxes(msg.plane);
  const u = (tip_mm[ax0]! - msg.origin_mm[0]!) / msg.spacing_mm[0]!;
  const v = (tip_mm[ax1]! - msg.origin_mm[1]!) / msg.spacing_mm[1]!;
  const w = msg.shape[0]!;
  const h = msg.shape[1]!;
  if (u < -0.5 || v < -0.5 || u > w - 0.5 || v > h - 0.5) return null;
  return [u, v];
}

export function formatDistance(mm: number): string {
  if (!Number.isFinite(mm)) return "--";
  return `${mm.toFixed(2)} mm`;
}

export function formatForce(n: number): string {
  return `${n.toFixed(2)} N`;
}

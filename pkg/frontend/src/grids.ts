/** Decoding of the base64 float32 grids the service returns, plus the
 * hot-spot cell selection used by the overlay. The selection replicates the
 * server's tie rule (stable descending sort, row-major index breaks ties) so
 * a constant field highlights the same cells the server would report. */

import type { PredictResponse } from "./types.js";

export interface DecodedGrid {
  h: number;
  w: number;
  /** row-major, length h*w */
  values: Float32Array;
  /** row-major, 1 = cell inside the blank */
  mask: Uint8Array;
}

export function decodeBase64(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

function floatsLE(bytes: Uint8Array): Float32Array {
  if (bytes.byteLength % 4 !== 0) throw new Error(`float32 payload has ${bytes.byteLength} bytes`);
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const out = new Float32Array(bytes.byteLength / 4);
  for (let i = 0; i < out.length; i++) out[i] = view.getFloat32(i * 4, true);
  return out;
}

/** Throws on malformed payloads; callers keep the previous frame on error. */
export function decodeGrid(resp: PredictResponse): DecodedGrid {
  const [h, w] = resp.shape;
  if (!Number.isInteger(h) || !Number.isInteger(w) || h <= 0 || w <= 0) {
    throw new Error(`bad shape [${resp.shape}]`);
  }
  if (typeof resp.grid_b64 !== "string") throw new Error("grid_b64 missing");
  const values = floatsLE(decodeBase64(resp.grid_b64));
  if (values.length !== h * w) {
    throw new Error(`grid has ${values.length} values, expected ${h * w}`);
  }
  const mask = decodeBase64(resp.mask_b64);
  if (mask.length !== h * w) {
    throw new Error(`mask has ${mask.length} values, expected ${h * w}`);
  }
  return { h, w, values, mask };
}

export const HOTSPOT_FRACTION = 0.003;

/** Flat indices of the top-`fraction` valid cells (at least one). */
export function hotspotCells(grid: DecodedGrid, fraction: number = HOTSPOT_FRACTION): Set<number> {
  const valid: number[] = [];
  for (let i = 0; i < grid.values.length; i++) {
    if (grid.mask[i]) valid.push(i);
  }
  if (valid.length === 0) return new Set();
  const k = Math.max(1, Math.floor(fraction * valid.length));
  valid.sort((a, b) => {
    const d = grid.values[b] - grid.values[a];
    return d !== 0 ? d : a - b; // ties: earlier row-major cell wins
  });
  return new Set(valid.slice(0, k));
}

/** Pure rasterization of a decoded grid to RGBA pixels. The DOM layer blits
 * the result onto a canvas; keeping this canvas-free makes it testable. */

import { colorFor } from "./colormap.js";
import type { DecodedGrid } from "./grids.js";

export interface RenderOptions {
  /** color scale bounds; pass the server summary min/max for auto-range */
  lo: number;
  hi: number;
  /** flat cell indices to highlight */
  hotspot?: Set<number>;
}

export interface RenderedImage {
  width: number;
  height: number;
  /** RGBA, row-major, length width*height*4 */
  data: Uint8ClampedArray<ArrayBuffer>;
}

export const HOTSPOT_COLOR: [number, number, number] = [255, 40, 40];

export function renderGrid(grid: DecodedGrid, opts: RenderOptions): RenderedImage {
  const { h, w, values, mask } = grid;
  const data = new Uint8ClampedArray(h * w * 4);
  for (let i = 0; i < h * w; i++) {
    const o = i * 4;
    if (!mask[i]) {
      data[o + 3] = 0; // outside the blank: transparent
      continue;
    }
    const [r, g, b] = opts.hotspot?.has(i)
      ? HOTSPOT_COLOR
      : colorFor(values[i], opts.lo, opts.hi);
    data[o] = r;
    data[o + 1] = g;
    data[o + 2] = b;
    data[o + 3] = 255;
  }
  return { width: w, height: h, data };
}

/** Viridis colormap, matching the palette the service uses for its PNG
 * heat maps so client renders and offline figures agree. */

export type RGB = [number, number, number];

// evenly spaced anchors of matplotlib's viridis
export const VIRIDIS_STOPS: RGB[] = [
  [68, 1, 84],
  [72, 40, 120],
  [62, 74, 137],
  [49, 104, 142],
  [38, 130, 142],
  [31, 158, 137],
  [53, 183, 121],
  [109, 199, 85],
  [180, 222, 44],
  [253, 231, 37],
];

export function viridis(t: number): RGB {
  const x = Math.min(1, Math.max(0, t)) * (VIRIDIS_STOPS.length - 1);
  const i = Math.min(VIRIDIS_STOPS.length - 2, Math.floor(x));
  const f = x - i;
  const a = VIRIDIS_STOPS[i];
  const b = VIRIDIS_STOPS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/** Normalized position of v in [lo, hi]; a degenerate range maps to mid. */
export function normalize(v: number, lo: number, hi: number): number {
  if (!(hi > lo)) return 0.5;
  return (v - lo) / (hi - lo);
}

export function colorFor(v: number, lo: number, hi: number): RGB {
  return viridis(normalize(v, lo, hi));
}

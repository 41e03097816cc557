/** Slider construction from the parameter ranges the service advertises.
 * Bounds are taken verbatim from /fields; nothing is rounded or padded, and
 * the extremes of a slider map to exactly the served bound values. */

export interface SliderSpec {
  name: string;
  min: number;
  max: number;
  step: number;
  initial: number;
}

export const SLIDER_STEPS = 200;

export function sliderSpecs(ranges: Record<string, [number, number]>): SliderSpec[] {
  return Object.entries(ranges).map(([name, [lo, hi]]) => ({
    name,
    min: lo,
    max: hi,
    step: (hi - lo) / SLIDER_STEPS,
    initial: lo + (hi - lo) / 2,
  }));
}

/** Value at normalized slider position t in [0, 1]; the ends return the
 * bound values exactly, not a lerp that lands 1 ulp off. */
export function valueAt(spec: SliderSpec, t: number): number {
  if (t <= 0) return spec.min;
  if (t >= 1) return spec.max;
  return spec.min + t * (spec.max - spec.min);
}

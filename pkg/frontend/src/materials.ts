/** Material picker helpers: cluster grouping and the stress-strain preview
 * chart. Chart geometry is derived purely from the server's preview points. */

import type { MaterialInfo, MaterialsCatalog } from "./types.js";

export interface ClusterGroup {
  cluster: number;
  materials: MaterialInfo[];
}

export function groupByCluster(catalog: MaterialsCatalog): ClusterGroup[] {
  const byCluster = new Map<number, MaterialInfo[]>();
  for (const m of catalog.materials) {
    const bucket = byCluster.get(m.cluster);
    if (bucket) bucket.push(m);
    else byCluster.set(m.cluster, [m]);
  }
  return [...byCluster.entries()]
    .sort(([a], [b]) => a - b)
    .map(([cluster, materials]) => ({ cluster, materials }));
}

export function pickerEnabled(catalog: MaterialsCatalog): boolean {
  return catalog.materials.length > 0;
}

export interface CurveChart {
  /** SVG path of the preview polyline in a width x height viewport */
  pathD: string;
  /** data-space points backing the path, verbatim from the catalog */
  points: [number, number][];
  strainMax: number;
  stressMax: number;
}

export function curveChart(m: MaterialInfo, width: number, height: number): CurveChart {
  const points = m.preview;
  if (points.length === 0) return { pathD: "", points, strainMax: 0, stressMax: 0 };
  const strainMax = Math.max(...points.map((p) => p[0]));
  const stressMax = Math.max(...points.map((p) => p[1]));
  const sx = strainMax > 0 ? width / strainMax : 0;
  const sy = stressMax > 0 ? height / stressMax : 0;
  const pathD = points
    .map(([e, s], i) => `${i === 0 ? "M" : "L"}${(e * sx).toFixed(2)},${(height - s * sy).toFixed(2)}`)
    .join(" ");
  return { pathD, points, strainMax, stressMax };
}

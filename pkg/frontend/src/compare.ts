/** Side-by-side run comparison: XOR diff of binarized grids and metric
 * deltas, recomputed client-side. */
import type { ResultMetrics, RunRecord } from "./types.js";

export function binarize(grid: number[][], threshold = 0.5): boolean[][] {
  return grid.map((row) => row.map((v) => v > threshold));
}

export function volumeFraction(grid: number[][], threshold = 0.5): number {
  let solid = 0;
  let total = 0;
  for (const row of grid) {
    for (const v of row) {
      total += 1;
      if (v > threshold) solid += 1;
    }
  }
  return total ? solid / total : 0;
}

export function xorDiff(a: number[][], b: number[][]): boolean[][] {
  if (a.length !== b.length || a[0]?.length !== b[0]?.length) {
    throw new Error("grids must have matching shapes");
  }
  const ba = binarize(a);
  const bb = binarize(b);
  return ba.map((row, y) => row.map((v, x) => v !== bb[y][x]));
}

export function diffCount(diff: boolean[][]): number {
  return diff.reduce((acc, row) => acc + row.filter(Boolean).length, 0);
}

export interface MetricDeltas {
  volume_fraction: number;
  vf_error_pct: number;
  compliance: number | null;
}

export function metricDeltas(a: ResultMetrics, b: ResultMetrics): MetricDeltas {
  return {
    volume_fraction: a.volume_fraction - b.volume_fraction,
    vf_error_pct: a.vf_error_pct - b.vf_error_pct,
    compliance:
      a.compliance !== null && b.compliance !== null ? a.compliance - b.compliance : null,
  };
}

/** Client-side recomputation of the server-reported volume metrics, used
 * to cross-check the comparison panel's numbers. */
export function recomputeVolumeMetrics(record: RunRecord): {
  volume_fraction: number;
  vf_error_pct: number;
} {
  const vf = volumeFraction(record.density);
  return {
    volume_fraction: vf,
    vf_error_pct: 100 * Math.abs(vf - record.vf),
  };
}

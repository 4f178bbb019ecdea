/** Color scales. Stress/strain overlays span orders of magnitude near
 * the point load, so they use a log ramp. */

const STOPS: [number, number, number][] = [
  [13, 8, 135],
  [84, 2, 163],
  [156, 23, 158],
  [216, 55, 107],
  [251, 180, 26],
];

export function rampColor(t: number): [number, number, number] {
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (STOPS.length - 1);
  const i = Math.min(STOPS.length - 2, Math.floor(pos));
  const frac = pos - i;
  return [0, 1, 2].map((k) =>
    Math.round(STOPS[i][k] + frac * (STOPS[i + 1][k] - STOPS[i][k])),
  ) as [number, number, number];
}

/** Log-scale normalization: t = log1p(v) / log1p(max). */
export function logScale(value: number, max: number): number {
  if (!(max > 0) || !(value > 0)) return 0;
  return Math.log1p(value) / Math.log1p(max);
}

export function fieldColor(value: number, max: number): [number, number, number] {
  return rampColor(logScale(value, max));
}

/** Density gray: 1 = solid = dark. */
export function densityGray(value: number): number {
  return Math.round(255 * (1 - Math.min(1, Math.max(0, value))));
}

/** Pointer geometry: drag-to-angle and boundary snapping, in normalized
 * domain coordinates (x right, y up, both in [0, 1]). */

export function dragToAngleDeg(x0: number, y0: number, x1: number, y1: number): number {
  const deg = (Math.atan2(y1 - y0, x1 - x0) * 180) / Math.PI;
  return ((deg % 360) + 360) % 360;
}

/** Project a point to the closest location on the unit-square boundary. */
export function projectToBoundary(x: number, y: number): { x: number; y: number } {
  const cx = Math.min(1, Math.max(0, x));
  const cy = Math.min(1, Math.max(0, y));
  const candidates = [
    { x: cx, y: 0, d: Math.abs(cy - 0) },
    { x: cx, y: 1, d: Math.abs(1 - cy) },
    { x: 0, y: cy, d: Math.abs(cx - 0) },
    { x: 1, y: cy, d: Math.abs(1 - cx) },
  ];
  candidates.sort((a, b) => a.d - b.d);
  return { x: candidates[0].x, y: candidates[0].y };
}

/** Canvas pixel -> normalized domain coordinates (canvas y points down). */
export function canvasToDomain(
  px: number,
  py: number,
  width: number,
  height: number,
): { x: number; y: number } {
  return { x: px / width, y: 1 - py / height };
}

/** Pure geometry for the alignment workspace.
 *
 * Edges are polylines built from height arrays: x is the fiber index, y
 * the break height. The residual readout depends only on the two height
 * arrays and the current transform; rotation is a visual aid and does not
 * enter the residual, which compares heights fiber by fiber.
 */

export interface Point {
  x: number;
  y: number;
}

export interface Transform {
  /** horizontal shift of the candidate edge, in fiber units */
  dx: number;
  /** vertical shift of the candidate edge, in height units */
  dy: number;
  /** rotation of the candidate polyline about its centroid, degrees */
  rotationDeg: number;
}

export const ROTATION_LIMIT_DEG = 10;
export const ROTATION_STEP_DEG = 0.5;

export function identityTransform(): Transform {
  return { dx: 0, dy: 0, rotationDeg: 0 };
}

/** Snaps to the 0.5-degree grid, then clamps to +-10 degrees. */
export function clampRotation(deg: number): number {
  const snapped = Math.round(deg / ROTATION_STEP_DEG) * ROTATION_STEP_DEG;
  return Math.min(ROTATION_LIMIT_DEG, Math.max(-ROTATION_LIMIT_DEG, snapped));
}

export function profileToPoints(heights: readonly number[]): Point[] {
  return heights.map((y, x) => ({ x, y }));
}

export function transformPoints(points: readonly Point[], t: Transform): Point[] {
  if (points.length === 0) return [];
  let cx = 0;
  let cy = 0;
  for (const p of points) {
    cx += p.x;
    cy += p.y;
  }
  cx /= points.length;
  cy /= points.length;
  const theta = (t.rotationDeg * Math.PI) / 180;
  const cos = Math.cos(theta);
  const sin = Math.sin(theta);
  return points.map((p) => {
    const rx = p.x - cx;
    const ry = p.y - cy;
    return {
      x: cx + rx * cos - ry * sin + t.dx,
      y: cy + rx * sin + ry * cos + t.dy,
    };
  });
}

export interface ResidualReadout {
  /** mean |upper - lower - offset| over the overlapping fibers */
  mean: number;
  /** max |upper - lower - offset| over the overlapping fibers */
  max: number;
  /** number of fibers the two edges overlap on after the shift */
  overlap: number;
}

/**
 * Residual between the target's edge and the candidate's edge under the
 * current transform: the candidate is shifted by round(dx) fibers and dy
 * height units, and each overlapping fiber contributes
 * |upper[i] - lower[i - shift] - dy|. No overlap yields NaN readouts.
 */
export function residualReadout(
  upper: readonly number[],
  lower: readonly number[],
  t: Transform,
): ResidualReadout {
  const shift = Math.round(t.dx);
  let sum = 0;
  let max = 0;
  let overlap = 0;
  for (let i = 0; i < upper.length; i++) {
    const j = i - shift;
    if (j < 0 || j >= lower.length) continue;
    const r = Math.abs(upper[i] - lower[j] - t.dy);
    sum += r;
    if (r > max) max = r;
    overlap += 1;
  }
  if (overlap === 0) {
    return { mean: Number.NaN, max: Number.NaN, overlap: 0 };
  }
  return { mean: sum / overlap, max, overlap };
}

/** Maps profile points into canvas pixels, preserving aspect per axis. */
export function fitToCanvas(
  points: readonly Point[],
  width: number,
  height: number,
  margin = 8,
): Point[] {
  if (points.length === 0) return [];
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const p of points) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const sx = (width - 2 * margin) / spanX;
  const sy = (height - 2 * margin) / spanY;
  // canvas y grows downward; profiles render with height increasing upward
  return points.map((p) => ({
    x: margin + (p.x - minX) * sx,
    y: height - margin - (p.y - minY) * sy,
  }));
}

/** Shared vertical window over both edges so they render in one frame. */
export function sharedFrame(
  a: readonly Point[],
  b: readonly Point[],
): { minX: number; maxX: number; minY: number; maxY: number } {
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const p of [...a, ...b]) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  if (!Number.isFinite(minX)) {
    return { minX: 0, maxX: 1, minY: 0, maxY: 1 };
  }
  return { minX, maxX, minY, maxY };
}

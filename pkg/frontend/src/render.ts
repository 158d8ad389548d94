/** Canvas rendering: thumbnails in the browser list, the two-edge
 * alignment workspace with overlay, edge enhancement and layer swap. */

import {
  fitToCanvas,
  profileToPoints,
  sharedFrame,
  transformPoints,
  type Point,
  type Transform,
} from "./geometry.js";
import type { ViewOptions } from "./state.js";

const TARGET_COLOR = "#2563eb";
const CANDIDATE_COLOR = "#dc2626";
const RESIDUAL_COLOR = "rgba(234, 179, 8, 0.55)";

function stroke(
  ctx: CanvasRenderingContext2D,
  points: readonly Point[],
  color: string,
  width: number,
): void {
  if (points.length === 0) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.lineJoin = "round";
  ctx.beginPath();
  ctx.moveTo(points[0].x, points[0].y);
  for (let i = 1; i < points.length; i++) {
    ctx.lineTo(points[i].x, points[i].y);
  }
  ctx.stroke();
}

export function drawThumbnail(
  canvas: HTMLCanvasElement,
  heights: readonly number[],
  color = TARGET_COLOR,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const points = fitToCanvas(
    profileToPoints(heights),
    canvas.width,
    canvas.height,
    3,
  );
  stroke(ctx, points, color, 1.4);
}

function mapToFrame(
  points: readonly Point[],
  frame: { minX: number; maxX: number; minY: number; maxY: number },
  width: number,
  height: number,
  margin: number,
): Point[] {
  const spanX = frame.maxX - frame.minX || 1;
  const spanY = frame.maxY - frame.minY || 1;
  const sx = (width - 2 * margin) / spanX;
  const sy = (height - 2 * margin) / spanY;
  return points.map((p) => ({
    x: margin + (p.x - frame.minX) * sx,
    y: height - margin - (p.y - frame.minY) * sy,
  }));
}

/** Pixels per profile unit at the current frame, for drag mapping. */
export function workspaceScale(
  canvas: HTMLCanvasElement,
  targetHeights: readonly number[],
  candidateHeights: readonly number[],
  transform: Transform,
): { sx: number; sy: number } {
  const targetPts = profileToPoints(targetHeights);
  const candidatePts = transformPoints(profileToPoints(candidateHeights), transform);
  const frame = sharedFrame(targetPts, candidatePts);
  const margin = 14;
  return {
    sx: (canvas.width - 2 * margin) / (frame.maxX - frame.minX || 1),
    sy: (canvas.height - 2 * margin) / (frame.maxY - frame.minY || 1),
  };
}

export function drawWorkspace(
  canvas: HTMLCanvasElement,
  targetHeights: readonly number[],
  candidateHeights: readonly number[],
  transform: Transform,
  view: ViewOptions,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  const targetPts = profileToPoints(targetHeights);
  const candidatePts = transformPoints(profileToPoints(candidateHeights), transform);
  const frame = sharedFrame(targetPts, candidatePts);
  const margin = 14;
  const a = mapToFrame(targetPts, frame, canvas.width, canvas.height, margin);
  const b = mapToFrame(candidatePts, frame, canvas.width, canvas.height, margin);

  if (view.overlay) {
    // vertical residual bars where the two polylines share a fiber index
    ctx.strokeStyle = RESIDUAL_COLOR;
    ctx.lineWidth = 2;
    const shift = Math.round(transform.dx);
    for (let i = 0; i < a.length; i++) {
      const j = i - shift;
      if (j < 0 || j >= b.length) continue;
      ctx.beginPath();
      ctx.moveTo(a[i].x, a[i].y);
      ctx.lineTo(a[i].x, b[j].y);
      ctx.stroke();
    }
  }

  const width = view.edgeEnhance ? 3.0 : 1.4;
  const layers: Array<[readonly Point[], string]> = view.layerSwap
    ? [
        [a, TARGET_COLOR],
        [b, CANDIDATE_COLOR],
      ]
    : [
        [b, CANDIDATE_COLOR],
        [a, TARGET_COLOR],
      ];
  for (const [points, color] of layers) {
    stroke(ctx, points, color, width);
  }
}

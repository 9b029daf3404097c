// Canvas drawing for the overlay layers. Style rules: trajectories get a
// stable per-id color; the traced path distinguishes truncated-trajectory
// spans from bridge spans (bridges in white, on the thicker red path).

import type { PathPiece, TrackedPathDto, TrajectoryDto } from "./api";
import type { Viewport } from "./viewport";

export interface PieceStyle {
  stroke: string;
  width: number;
  dash: number[];
}

export function pieceStyle(kind: PathPiece["kind"]): PieceStyle {
  if (kind === "bridge") {
    return { stroke: "#ffffff", width: 2.5, dash: [6, 3] };
  }
  return { stroke: "#e53935", width: 3, dash: [] };
}

export function trajectoryColor(id: number): string {
  const hue = (id * 137.508) % 360; // golden-angle spacing keeps ids distinct
  return `hsl(${hue.toFixed(1)}, 85%, 60%)`;
}

function drawPolyline(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  points: [number, number][],
  style: PieceStyle,
): void {
  if (points.length === 0) return;
  ctx.save();
  ctx.strokeStyle = style.stroke;
  ctx.lineWidth = style.width;
  ctx.setLineDash(style.dash);
  ctx.lineJoin = "round";
  ctx.beginPath();
  points.forEach(([x, y], i) => {
    const p = view.toCanvas(x, y);
    if (i === 0) ctx.moveTo(p.x, p.y);
    else ctx.lineTo(p.x, p.y);
  });
  ctx.stroke();
  ctx.restore();
}

export function drawTrajectories(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  trajectories: TrajectoryDto[],
  highlighted: number[] = [],
): void {
  const strong = new Set(highlighted);
  for (const t of trajectories) {
    drawPolyline(ctx, view, t.points, {
      stroke: trajectoryColor(t.id),
      width: strong.has(t.id) ? 4 : 1.5,
      dash: [],
    });
  }
}

export function drawTrackedPath(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  path: TrackedPathDto,
): void {
  for (const piece of path.pieces) {
    const [a, b] = piece.span;
    if (b - a < 1) continue;
    const span = path.polyline.slice(Math.max(0, a - 1), b);
    drawPolyline(ctx, view, span, pieceStyle(piece.kind));
  }
}

export function drawSeeds(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  seeds: [number, number][],
): void {
  seeds.forEach(([x, y], i) => {
    const p = view.toCanvas(x, y);
    ctx.save();
    ctx.fillStyle = i === 0 ? "#00e5ff" : "#ffee58";
    ctx.strokeStyle = "#000";
    ctx.beginPath();
    ctx.arc(p.x, p.y, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
    ctx.fillStyle = "#000";
    ctx.font = "10px sans-serif";
    ctx.fillText(String(i + 1), p.x - 3, p.y + 3.5);
    ctx.restore();
  });
}

export function drawImageLayer(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  bitmap: CanvasImageSource,
  width: number,
  height: number,
  alpha = 1.0,
): void {
  const origin = view.toCanvas(0, 0);
  ctx.save();
  ctx.imageSmoothingEnabled = view.scale < 4;
  ctx.globalAlpha = alpha;
  ctx.drawImage(bitmap, origin.x, origin.y, width * view.scale, height * view.scale);
  ctx.restore();
}

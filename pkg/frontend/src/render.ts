// Canvas drawing for the frame overlay and the error-norm sparkline.

import { lineToSegment } from "./geometry.js";
import type { OverlayConstraint } from "./protocol.js";
import type { SparklinePoint } from "./view.js";

const SIDE_COLORS = { gripper: "#4dd0e1", target: "#ffb74d" };

function drawCross(ctx: CanvasRenderingContext2D, x: number, y: number, color: string): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(x - 6, y);
  ctx.lineTo(x + 6, y);
  ctx.moveTo(x, y - 6);
  ctx.lineTo(x, y + 6);
  ctx.stroke();
}

function drawLine(
  ctx: CanvasRenderingContext2D,
  coeffs: [number, number, number],
  color: string,
): void {
  const segment = lineToSegment(
    { a: coeffs[0], b: coeffs[1], c: coeffs[2] },
    ctx.canvas.width,
    ctx.canvas.height,
  );
  if (!segment) {
    return;
  }
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.0;
  ctx.setLineDash([6, 4]);
  ctx.beginPath();
  ctx.moveTo(segment[0], segment[1]);
  ctx.lineTo(segment[2], segment[3]);
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawArrow(
  ctx: CanvasRenderingContext2D,
  from: [number, number],
  to: [number, number],
): void {
  ctx.strokeStyle = "#ef5350";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(from[0], from[1]);
  ctx.lineTo(to[0], to[1]);
  ctx.stroke();
  const angle = Math.atan2(to[1] - from[1], to[0] - from[0]);
  ctx.beginPath();
  ctx.moveTo(to[0], to[1]);
  ctx.lineTo(to[0] - 8 * Math.cos(angle - 0.4), to[1] - 8 * Math.sin(angle - 0.4));
  ctx.moveTo(to[0], to[1]);
  ctx.lineTo(to[0] - 8 * Math.cos(angle + 0.4), to[1] - 8 * Math.sin(angle + 0.4));
  ctx.stroke();
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  constraints: OverlayConstraint[],
): void {
  for (const item of constraints) {
    if (item.f1) {
      drawCross(ctx, item.f1[0] / item.f1[2], item.f1[1] / item.f1[2], SIDE_COLORS.gripper);
    }
    if (item.f2) {
      drawCross(ctx, item.f2[0] / item.f2[2], item.f2[1] / item.f2[2], SIDE_COLORS.target);
    }
    if (item.f12) {
      drawLine(ctx, item.f12, SIDE_COLORS.gripper);
    }
    if (item.f34) {
      drawLine(ctx, item.f34, SIDE_COLORS.target);
    }
    if (item.kind === "p2p" && item.f1 && item.f2) {
      drawArrow(
        ctx,
        [item.f2[0] / item.f2[2], item.f2[1] / item.f2[2]],
        [item.f1[0] / item.f1[2], item.f1[1] / item.f1[2]],
      );
    }
  }
}

export function drawClicks(
  ctx: CanvasRenderingContext2D,
  clicks: Array<[number, number]>,
  fixedCount: number,
): void {
  clicks.forEach(([x, y], i) => {
    drawCross(ctx, x, y, i < fixedCount ? SIDE_COLORS.gripper : SIDE_COLORS.target);
  });
}

export function drawSparkline(
  ctx: CanvasRenderingContext2D,
  points: SparklinePoint[],
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  if (points.length < 2) {
    return;
  }
  const maxNorm = Math.max(...points.map((p) => p.errorNorm), 1e-9);
  const x = (i: number) => (i / (points.length - 1)) * (width - 4) + 2;
  const y = (norm: number) => height - 2 - (norm / maxNorm) * (height - 6);
  ctx.strokeStyle = "#81c784";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  points.forEach((p, i) => {
    if (i === 0) {
      ctx.moveTo(x(i), y(p.errorNorm));
    } else {
      ctx.lineTo(x(i), y(p.errorNorm));
    }
  });
  ctx.stroke();
  ctx.fillStyle = "#9e9e9e";
  ctx.font = "10px monospace";
  ctx.fillText(maxNorm.toFixed(1), 4, 10);
}

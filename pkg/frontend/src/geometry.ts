// Client-side constraint error math, duplicating the server's geometry so
// annotation previews render without a round trip. The server remains the
// source of truth; these must agree with it to 1e-6.

import type { ConstraintKind } from "./protocol.js";

export interface Point {
  x: number;
  y: number;
  w: number;
}

export interface Line {
  a: number;
  b: number;
  c: number;
}

export function point(x: number, y: number, w = 1): Point {
  return { x, y, w };
}

export function normalizePoint(p: Point): Point {
  if (Math.abs(p.w) <= 1e-9) {
    throw new Error("point at infinity");
  }
  return { x: p.x / p.w, y: p.y / p.w, w: 1 };
}

// Unit (a, b) with the first nonzero of (a, b) positive, matching the
// server's canonical sign so signed distances agree.
export function normalizeLine(line: Line): Line {
  const norm = Math.hypot(line.a, line.b);
  if (norm <= 1e-12) {
    throw new Error("line has no finite direction");
  }
  let a = line.a / norm;
  let b = line.b / norm;
  let c = line.c / norm;
  const lead = Math.abs(a) > 1e-12 ? a : b;
  if (lead < 0) {
    a = -a;
    b = -b;
    c = -c;
  }
  return { a, b, c };
}

export function lineThroughPoints(p1: Point, p2: Point): Line {
  const a = p1.y * p2.w - p1.w * p2.y;
  const b = p1.w * p2.x - p1.x * p2.w;
  const c = p1.x * p2.y - p1.y * p2.x;
  const scale = Math.max(
    1,
    Math.hypot(p1.x, p1.y, p1.w) * Math.hypot(p2.x, p2.y, p2.w),
  );
  if (Math.hypot(a, b, c) <= 1e-12 * scale) {
    throw new Error("coincident points do not span a line");
  }
  return normalizeLine({ a, b, c });
}

export function pointToPointError(f1: Point, f2: Point): [number, number] {
  const p1 = normalizePoint(f1);
  const p2 = normalizePoint(f2);
  return [p2.x - p1.x, p2.y - p1.y];
}

export function pointToLineError(f1: Point, f34: Line): number {
  const p = normalizePoint(f1);
  const line = normalizeLine(f34);
  return p.x * line.a + p.y * line.b + line.c;
}

export function lineToLineError(f1: Point, f2: Point, f34: Line): number {
  return pointToLineError(f1, f34) + pointToLineError(f2, f34);
}

export function parallelLinesError(f12: Line, f34: Line): number {
  const l1 = normalizeLine(f12);
  const l2 = normalizeLine(f34);
  return l1.a * l2.b - l1.b * l2.a;
}

// Error preview for an annotation's clicks, using the same click layout
// the server applies: leading clicks are the fixed gripper side, trailing
// clicks the target side.
export function previewError(kind: ConstraintKind, clicks: Array<[number, number]>): number[] {
  const pts = clicks.map(([x, y]) => point(x, y));
  switch (kind) {
    case "p2p":
      return pointToPointError(pts[0], pts[1]);
    case "p2l":
      return [pointToLineError(pts[0], lineThroughPoints(pts[1], pts[2]))];
    case "l2l":
      return [lineToLineError(pts[0], pts[1], lineThroughPoints(pts[2], pts[3]))];
    case "par":
      return [
        parallelLinesError(
          lineThroughPoints(pts[0], pts[1]),
          lineThroughPoints(pts[2], pts[3]),
        ),
      ];
  }
}

// Clip a normalized line to the image rectangle for rendering; returns a
// drawable segment or null when the line misses the viewport.
export function lineToSegment(
  line: Line,
  width: number,
  height: number,
): [number, number, number, number] | null {
  const hits: Array<[number, number]> = [];
  const { a, b, c } = line;
  const push = (x: number, y: number) => {
    if (x >= -1e-9 && x <= width + 1e-9 && y >= -1e-9 && y <= height + 1e-9) {
      hits.push([x, y]);
    }
  };
  if (Math.abs(b) > 1e-12) {
    push(0, -c / b);
    push(width, -(c + a * width) / b);
  }
  if (Math.abs(a) > 1e-12) {
    push(-(c) / a, 0);
    push(-(c + b * height) / a, height);
  }
  if (hits.length < 2) {
    return null;
  }
  let best: [number, number, number, number] | null = null;
  let bestLen = -1;
  for (let i = 0; i < hits.length; i++) {
    for (let j = i + 1; j < hits.length; j++) {
      const len = Math.hypot(hits[i][0] - hits[j][0], hits[i][1] - hits[j][1]);
      if (len > bestLen) {
        bestLen = len;
        best = [hits[i][0], hits[i][1], hits[j][0], hits[j][1]];
      }
    }
  }
  return bestLen > 1e-6 ? best : null;
}

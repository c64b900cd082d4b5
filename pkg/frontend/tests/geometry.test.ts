// The local preview math must agree with the server's geometry. The
// fixture file holds error vectors computed by the backend library for
// random click sets; parity tolerance is 1e-6.

import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import {
  lineThroughPoints,
  lineToSegment,
  normalizeLine,
  normalizePoint,
  parallelLinesError,
  point,
  pointToLineError,
  pointToPointError,
  previewError,
} from "../src/geometry";
import type { ConstraintKind } from "../src/protocol";

const here = dirname(fileURLToPath(import.meta.url));
const fixtures = JSON.parse(
  readFileSync(join(here, "fixtures", "preview-parity.json"), "utf-8"),
) as {
  cases: Array<{ kind: ConstraintKind; clicks: Array<[number, number]>; expected: number[] }>;
};

describe("preview parity with the backend", () => {
  it("matches all fixture cases within 1e-6", () => {
    expect(fixtures.cases.length).toBeGreaterThanOrEqual(40);
    for (const c of fixtures.cases) {
      const got = previewError(c.kind, c.clicks);
      expect(got.length).toBe(c.expected.length);
      for (let i = 0; i < got.length; i++) {
        expect(Math.abs(got[i] - c.expected[i])).toBeLessThan(1e-6);
      }
    }
  });
});

describe("geometry primitives", () => {
  it("normalizes points by the homogeneous scale", () => {
    const p = normalizePoint(point(4, 6, 2));
    expect(p).toEqual({ x: 2, y: 3, w: 1 });
    expect(() => normalizePoint(point(1, 2, 0))).toThrow();
  });

  it("builds normalized lines through two points", () => {
    const line = lineThroughPoints(point(0, 0), point(1, 0));
    expect(line.a).toBeCloseTo(0, 12);
    expect(line.b).toBeCloseTo(1, 12);
    expect(line.c).toBeCloseTo(0, 12);
    expect(() => lineThroughPoints(point(3, 3), point(3, 3))).toThrow();
  });

  it("canonical sign makes the leading coefficient positive", () => {
    const line = normalizeLine({ a: -2, b: 0, c: 4 });
    expect(line.a).toBeCloseTo(1, 12);
    expect(line.c).toBeCloseTo(-2, 12);
  });

  it("point-to-point is the normalized pixel displacement", () => {
    expect(pointToPointError(point(0, 0), point(3, 4))).toEqual([3, 4]);
    expect(pointToPointError(point(2, 2, 2), point(3, 4))).toEqual([2, 3]);
  });

  it("point-to-line is a signed distance", () => {
    const vertical = normalizeLine({ a: 1, b: 0, c: 0 });
    expect(pointToLineError(point(3, 7), vertical)).toBeCloseTo(3, 12);
  });

  it("parallel-lines error is bounded and antisymmetric", () => {
    const l1 = lineThroughPoints(point(0, 0), point(10, 1));
    const l2 = lineThroughPoints(point(0, 5), point(10, 9));
    const e12 = parallelLinesError(l1, l2);
    const e21 = parallelLinesError(l2, l1);
    expect(Math.abs(e12)).toBeLessThanOrEqual(1);
    expect(e12).toBeCloseTo(-e21, 12);
    expect(parallelLinesError(l1, l1)).toBe(0);
  });

  it("clips lines to a drawable viewport segment", () => {
    const horizontal = normalizeLine({ a: 0, b: 1, c: -100 });
    const segment = lineToSegment(horizontal, 640, 480);
    expect(segment).not.toBeNull();
    const [x1, y1, x2, y2] = segment!;
    expect(y1).toBeCloseTo(100, 9);
    expect(y2).toBeCloseTo(100, 9);
    expect(Math.abs(x2 - x1)).toBeCloseTo(640, 9);

    const outside = normalizeLine({ a: 0, b: 1, c: -5000 });
    expect(lineToSegment(outside, 640, 480)).toBeNull();
  });
});

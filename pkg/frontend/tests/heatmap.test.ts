import { describe, expect, it } from "vitest";

import {
  divergingColor,
  maxAbs,
  signChangeEdges,
  zeroContourSegments,
  Segment,
} from "../src/heatmap";

function pointOnSegment(px: number, py: number, s: Segment, tol = 1e-9): boolean {
  const cross = (s.x2 - s.x1) * (py - s.y1) - (s.y2 - s.y1) * (px - s.x1);
  if (Math.abs(cross) > tol) return false;
  const dot =
    (px - s.x1) * (s.x2 - s.x1) + (py - s.y1) * (s.y2 - s.y1);
  const len2 = (s.x2 - s.x1) ** 2 + (s.y2 - s.y1) ** 2;
  return dot >= -tol && dot <= len2 + tol;
}

function randomField(n: number, m: number, seedBase: number): number[][] {
  // deterministic pseudo-random values in [-1, 1]
  const vals: number[][] = [];
  for (let i = 0; i < n; i++) {
    const row: number[] = [];
    for (let j = 0; j < m; j++) {
      const t = Math.sin(seedBase + i * 12.9898 + j * 78.233) * 43758.5453;
      row.push(2 * (t - Math.floor(t)) - 1);
    }
    vals.push(row);
  }
  return vals;
}

describe("zero contour", () => {
  it("crosses every sign-changing lattice edge exactly once", () => {
    const xs = [0, 1, 2, 3, 4];
    const ys = [0, 1, 2, 3];
    const values = randomField(xs.length, ys.length, 1.234);
    const segments = zeroContourSegments(xs, ys, values);
    for (const edge of signChangeEdges(xs, ys, values)) {
      const touching = segments.filter(
        (s) =>
          pointOnSegment(s.x1, s.y1, edge) || pointOnSegment(s.x2, s.y2, edge),
      );
      expect(touching.length).toBeGreaterThan(0);
    }
  });

  it("contour endpoints sit where linear interpolation hits zero", () => {
    const xs = [0, 1];
    const ys = [0, 1];
    const values = [
      [-1, -1],
      [3, -1],
    ]; // sign change only along the bottom edge x: 0->1 at x = 0.25
    const segments = zeroContourSegments(xs, ys, values);
    expect(segments.length).toBe(1);
    const endpoints = [
      [segments[0].x1, segments[0].y1],
      [segments[0].x2, segments[0].y2],
    ];
    const bottom = endpoints.find(([, y]) => y === 0)!;
    expect(bottom[0]).toBeCloseTo(0.25, 10);
  });

  it("produces no contour for a single-signed field", () => {
    const xs = [0, 1, 2];
    const ys = [0, 1, 2];
    const positive = xs.map(() => ys.map(() => 0.5));
    expect(zeroContourSegments(xs, ys, positive).length).toBe(0);
    expect(signChangeEdges(xs, ys, positive).length).toBe(0);
  });
});

describe("diverging color scale", () => {
  it("is blue for safe, red for unsafe, white near zero", () => {
    expect(divergingColor(-1, 1)).toBe("rgb(40,90,255)");
    expect(divergingColor(1, 1)).toBe("rgb(255,90,40)");
    expect(divergingColor(0, 1)).toBe("rgb(255,255,255)");
  });

  it("clamps out-of-scale values", () => {
    expect(divergingColor(-99, 1)).toBe(divergingColor(-1, 1));
  });
});

describe("maxAbs", () => {
  it("finds the largest magnitude and never returns zero", () => {
    expect(maxAbs([[1, -4], [2, 3]])).toBe(4);
    expect(maxAbs([[0, 0]])).toBe(1);
  });
});

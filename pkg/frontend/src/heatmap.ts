// Value-slice heatmap helpers. The displayed cells map one-to-one onto the
// fetched grid samples (no client-side smoothing) and the zero contour is
// derived purely from sign changes between adjacent samples, so what the
// operator sees is exactly what the monitor uses.

export interface Segment {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

// signed diverging scale: blue (safe, V<=0) -> white -> red (unsafe, V>0)
export function divergingColor(value: number, scale: number): string {
  const t = Math.max(-1, Math.min(1, value / scale));
  let r: number, g: number, b: number;
  if (t <= 0) {
    const u = 1 + t; // 0 at -1, 1 at 0
    r = Math.round(40 + 215 * u);
    g = Math.round(90 + 165 * u);
    b = 255;
  } else {
    const u = 1 - t;
    r = 255;
    g = Math.round(90 + 165 * u);
    b = Math.round(40 + 215 * u);
  }
  return `rgb(${r},${g},${b})`;
}

function interpZero(p1: number, v1: number, p2: number, v2: number): number {
  // linear zero crossing between two samples of opposite sign
  return p1 + ((p2 - p1) * v1) / (v1 - v2);
}

// Marching-squares zero contour over the sample lattice. values[i][j] is the
// sample at (xs[i], ys[j]). Returns line segments in data coordinates.
export function zeroContourSegments(
  xs: number[],
  ys: number[],
  values: number[][],
): Segment[] {
  const segments: Segment[] = [];
  for (let i = 0; i < xs.length - 1; i++) {
    for (let j = 0; j < ys.length - 1; j++) {
      const v00 = values[i][j];
      const v10 = values[i + 1][j];
      const v01 = values[i][j + 1];
      const v11 = values[i + 1][j + 1];
      const pts: [number, number][] = [];
      if (v00 > 0 !== v10 > 0) {
        pts.push([interpZero(xs[i], v00, xs[i + 1], v10), ys[j]]);
      }
      if (v01 > 0 !== v11 > 0) {
        pts.push([interpZero(xs[i], v01, xs[i + 1], v11), ys[j + 1]]);
      }
      if (v00 > 0 !== v01 > 0) {
        pts.push([xs[i], interpZero(ys[j], v00, ys[j + 1], v01)]);
      }
      if (v10 > 0 !== v11 > 0) {
        pts.push([xs[i + 1], interpZero(ys[j], v10, ys[j + 1], v11)]);
      }
      // connect crossing points pairwise (ambiguous saddles just pair in order)
      for (let k = 0; k + 1 < pts.length; k += 2) {
        segments.push({ x1: pts[k][0], y1: pts[k][1], x2: pts[k + 1][0], y2: pts[k + 1][1] });
      }
    }
  }
  return segments;
}

// Edges of the sample lattice whose endpoint values straddle zero; the
// contract is that every such edge is touched by exactly one contour segment.
export function signChangeEdges(
  xs: number[],
  ys: number[],
  values: number[][],
): Segment[] {
  const edges: Segment[] = [];
  for (let i = 0; i < xs.length; i++) {
    for (let j = 0; j < ys.length; j++) {
      if (i + 1 < xs.length && values[i][j] > 0 !== values[i + 1][j] > 0) {
        edges.push({ x1: xs[i], y1: ys[j], x2: xs[i + 1], y2: ys[j] });
      }
      if (j + 1 < ys.length && values[i][j] > 0 !== values[i][j + 1] > 0) {
        edges.push({ x1: xs[i], y1: ys[j], x2: xs[i], y2: ys[j + 1] });
      }
    }
  }
  return edges;
}

export function maxAbs(values: number[][]): number {
  let m = 0;
  for (const row of values) {
    for (const v of row) {
      m = Math.max(m, Math.abs(v));
    }
  }
  return m || 1;
}

/** Compact viridis approximation (11 anchor points, linear interpolation). */

const ANCHORS: Array<[number, number, number]> = [
  [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
  [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44],
  [253, 231, 37], [253, 231, 37],
];

/** Map t in [0, 1] to an rgb() color string. */
export function viridis(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (ANCHORS.length - 2);
  const i = Math.min(ANCHORS.length - 2, Math.floor(pos));
  const f = pos - i;
  const c = ANCHORS[i].map((a, k) => Math.round(a + f * (ANCHORS[i + 1][k] - a)));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

/** Normalizer for a data range; constant fields map to mid-scale. */
export function normalizer(lo: number, hi: number): (v: number) => number {
  return (v: number) => (hi === lo ? 0.5 : (v - lo) / (hi - lo));
}

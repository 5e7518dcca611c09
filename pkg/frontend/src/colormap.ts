/** Small colormap helpers: sequential (viridis-like stops) for positive
 * fields and a symmetric blue-white-red diverging map for signed fields. */

type Rgb = [number, number, number];

const VIRIDIS: Rgb[] = [
  [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142],
  [38, 130, 142], [31, 158, 137], [53, 183, 121], [109, 205, 89],
  [180, 222, 44], [253, 231, 37],
];

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

function sample(stops: Rgb[], t: number): Rgb {
  const x = Math.min(Math.max(t, 0), 1) * (stops.length - 1);
  const i = Math.min(Math.floor(x), stops.length - 2);
  const f = x - i;
  return [
    Math.round(lerp(stops[i][0], stops[i + 1][0], f)),
    Math.round(lerp(stops[i][1], stops[i + 1][1], f)),
    Math.round(lerp(stops[i][2], stops[i + 1][2], f)),
  ];
}

export function sequential(t: number): string {
  const [r, g, b] = sample(VIRIDIS, t);
  return `rgb(${r},${g},${b})`;
}

/** t in [-1, 1] mapped blue -> white -> red. */
export function diverging(t: number): string {
  const x = Math.min(Math.max(t, -1), 1);
  const mag = Math.abs(x);
  const base: Rgb = x < 0 ? [33, 102, 172] : [178, 24, 43];
  const r = Math.round(lerp(255, base[0], mag));
  const g = Math.round(lerp(255, base[1], mag));
  const b = Math.round(lerp(255, base[2], mag));
  return `rgb(${r},${g},${b})`;
}

/** Inverse of the sequential map, good enough for mask checks on rendered
 * cells: returns the approximate normalized value of an rgb() string. */
export function sequentialValue(rgb: string): number {
  const m = rgb.match(/rgb\((\d+),(\d+),(\d+)\)/);
  if (!m) return 0;
  const target: Rgb = [Number(m[1]), Number(m[2]), Number(m[3])];
  let best = 0;
  let bestDist = Infinity;
  for (let i = 0; i <= 256; i++) {
    const t = i / 256;
    const [r, g, b] = sample(VIRIDIS, t);
    const d = (r - target[0]) ** 2 + (g - target[1]) ** 2 + (b - target[2]) ** 2;
    if (d < bestDist) {
      bestDist = d;
      best = t;
    }
  }
  return best;
}

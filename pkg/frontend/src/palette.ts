// Palette interpolation mirroring the server's renderer exactly: clamp to
// [lo, hi], linear blend between surrounding anchors, channels rounded
// half-up. Both sides are checked against the same vector file in CI.

export type Rgb = [number, number, number];

export interface Palette {
  name: string;
  stops: Array<[number, Rgb]>; // anchors strictly increasing, 0 .. 1
  missingColor: Rgb;
}

const MISSING: Rgb = [200, 200, 200];

export const THERMAL: Palette = {
  name: "thermal",
  stops: [[0.0, [0, 0, 255]], [0.5, [255, 255, 255]], [1.0, [255, 0, 0]]],
  missingColor: MISSING,
};

export const RAIN: Palette = {
  name: "rain",
  stops: [[0.0, [255, 255, 255]], [1.0, [8, 48, 107]]],
  missingColor: MISSING,
};

export const GRAYSCALE: Palette = {
  name: "grayscale",
  stops: [[0.0, [0, 0, 0]], [1.0, [255, 255, 255]]],
  missingColor: MISSING,
};

export const PALETTES: Record<string, Palette> = {
  thermal: THERMAL,
  rain: RAIN,
  grayscale: GRAYSCALE,
};

function roundHalfUp(x: number): number {
  return Math.floor(x + 0.5);
}

export function colorOf(value: number, lo: number, hi: number, palette: Palette): Rgb {
  if (!(lo < hi)) {
    throw new Error(`degenerate range: lo ${lo} must be < hi ${hi}`);
  }
  let t = (value - lo) / (hi - lo);
  t = t < 0 ? 0 : t > 1 ? 1 : t;
  const stops = palette.stops;
  for (let i = 0; i + 1 < stops.length; i++) {
    const [a0, c0] = stops[i];
    const [a1, c1] = stops[i + 1];
    if (t <= a1) {
      const s = (t - a0) / (a1 - a0);
      return [
        roundHalfUp(c0[0] + (c1[0] - c0[0]) * s),
        roundHalfUp(c0[1] + (c1[1] - c0[1]) * s),
        roundHalfUp(c0[2] + (c1[2] - c0[2]) * s),
      ];
    }
  }
  return stops[stops.length - 1][1];
}

export function cssColor(rgb: Rgb): string {
  return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
}

/** Sequential single-hue palettes with accessible alternates. */

export type PaletteName = "blues" | "greens" | "oranges" | "grays";

export const PALETTES: Record<PaletteName, { low: string; high: string }> = {
  blues: { low: "#eff6ff", high: "#1d4ed8" },
  greens: { low: "#f0fdf4", high: "#15803d" },
  oranges: { low: "#fff7ed", high: "#c2410c" },
  grays: { low: "#f8fafc", high: "#1e293b" },
};

function hexToRgb(hex: string): [number, number, number] {
  const n = parseInt(hex.slice(1), 16);
  return [(n >> 16) & 0xff, (n >> 8) & 0xff, n & 0xff];
}

function mix(a: number, b: number, t: number): number {
  return Math.round(a + (b - a) * t);
}

export function clamp01(t: number): number {
  return Math.min(1, Math.max(0, t));
}

/** Interpolate the palette at t in [0, 1]. */
export function paletteColor(palette: PaletteName, t: number): string {
  const { low, high } = PALETTES[palette];
  const [r1, g1, b1] = hexToRgb(low);
  const [r2, g2, b2] = hexToRgb(high);
  const u = clamp01(t);
  return `rgb(${mix(r1, r2, u)}, ${mix(g1, g2, u)}, ${mix(b1, b2, u)})`;
}

export interface ColorScale {
  domain: [number, number];
  color(value: number): string;
  t(value: number): number;
}

/**
 * Normalize over the visible scores with padding so near-ties still get
 * visually distinct intensities. A degenerate domain widens to +/- 0.05.
 */
export function makeColorScale(
  scores: number[],
  palette: PaletteName,
  padding = 0.05,
): ColorScale {
  let lo = scores.length ? Math.min(...scores) : 0;
  let hi = scores.length ? Math.max(...scores) : 1;
  if (hi - lo < 1e-9) {
    lo -= 0.05;
    hi += 0.05;
  }
  const span = hi - lo;
  lo -= span * padding;
  hi += span * padding;
  const t = (value: number) => clamp01((value - lo) / (hi - lo));
  return { domain: [lo, hi], color: (value) => paletteColor(palette, t(value)), t };
}

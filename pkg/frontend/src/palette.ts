/** Fixed categorical palette (10 classes) and the color ramps used by the
 * overlay modes.  Estimate colors are probability-weighted blends of the
 * class colors; the blend uses the server's numbers as-is. */

export type Rgb = readonly [number, number, number];

export const PALETTE: readonly Rgb[] = [
  [31, 119, 180],
  [255, 127, 14],
  [44, 160, 44],
  [214, 39, 40],
  [148, 103, 189],
  [140, 86, 75],
  [227, 119, 194],
  [127, 127, 127],
  [188, 189, 34],
  [23, 190, 207],
];

export const MAX_CLASSES = PALETTE.length;

// received-mass ramp endpoints (mass 0 -> light, max mass -> deep blue)
const MASS_LO: Rgb = [236, 239, 241];
const MASS_HI: Rgb = [13, 71, 161];

// ci-width ramp endpoints (width 0 -> pale, width 1 -> deep orange)
const WIDTH_LO: Rgb = [255, 243, 224];
const WIDTH_HI: Rgb = [191, 54, 12];

function rgbString(rgb: Rgb): string {
  return `rgb(${rgb[0]}, ${rgb[1]}, ${rgb[2]})`;
}

function lerp(lo: Rgb, hi: Rgb, t: number): Rgb {
  const u = Math.min(1, Math.max(0, t));
  return [
    Math.round(lo[0] + (hi[0] - lo[0]) * u),
    Math.round(lo[1] + (hi[1] - lo[1]) * u),
    Math.round(lo[2] + (hi[2] - lo[2]) * u),
  ];
}

export function classColor(classIndex: number): string {
  const rgb = PALETTE[classIndex];
  if (rgb === undefined) {
    throw new Error(
      `class ${classIndex} out of palette range [0, ${MAX_CLASSES})`,
    );
  }
  return rgbString(rgb);
}

/** Probability-weighted blend of the class colors. */
export function blendColor(probabilities: number[]): string {
  if (probabilities.length > MAX_CLASSES) {
    throw new Error(
      `palette supports at most ${MAX_CLASSES} classes; ` +
        `got ${probabilities.length}`,
    );
  }
  let r = 0;
  let g = 0;
  let b = 0;
  for (let c = 0; c < probabilities.length; c++) {
    const p = probabilities[c] ?? 0;
    const rgb = PALETTE[c] as Rgb;
    r += p * rgb[0];
    g += p * rgb[1];
    b += p * rgb[2];
  }
  return rgbString([
    Math.min(255, Math.max(0, Math.round(r))),
    Math.min(255, Math.max(0, Math.round(g))),
    Math.min(255, Math.max(0, Math.round(b))),
  ]);
}

/** Received-mass ramp; the legend's lower end is pinned at mass 0. */
export function massColor(mass: number, maxMass: number): string {
  const t = maxMass > 0 ? mass / maxMass : 0;
  return rgbString(lerp(MASS_LO, MASS_HI, t));
}

/** Interval-width ramp over the natural width range [0, 1]. */
export function ciWidthColor(width: number): string {
  return rgbString(lerp(WIDTH_LO, WIDTH_HI, width));
}

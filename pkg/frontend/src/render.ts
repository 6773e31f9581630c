/** Pure view computation: ViewState -> draw operations and tooltip text.
 * Every number shown comes verbatim from a server payload; the only
 * arithmetic is interval width = upper - lower for the ci-width overlay. */

import { blendColor, ciWidthColor, massColor } from "./palette.js";
import type { Marker, ViewState } from "./store.js";
import type { UncertaintyRow } from "./types.js";

export interface DrawOp {
  id: string;
  x: number;
  y: number;
  fill: string;
  highlighted: boolean;
  marker: Marker | null;
}

export function maxCiWidth(rows: UncertaintyRow[] | undefined): number {
  if (rows === undefined || rows.length === 0) {
    return 1;
  }
  let widest = 0;
  for (const row of rows) {
    widest = Math.max(widest, row.upper - row.lower);
  }
  return widest;
}

export function drawOps(state: ViewState): DrawOp[] {
  let maxMass = 0;
  if (state.overlay === "received-mass") {
    for (const point of state.points) {
      const est = state.estimates.get(point.id);
      if (est !== undefined) {
        maxMass = Math.max(maxMass, est.received_mass);
      }
    }
  }
  const suggested = new Set(state.suggested);
  return state.points.map((point) => {
    const est = state.estimates.get(point.id);
    let fill: string;
    if (est === undefined) {
      fill = "rgb(200, 200, 200)";
    } else if (state.overlay === "estimate-color") {
      fill = blendColor(est.probabilities);
    } else if (state.overlay === "received-mass") {
      fill = massColor(est.received_mass, maxMass);
    } else {
      fill = ciWidthColor(maxCiWidth(state.uncertainty.get(point.id)));
    }
    return {
      id: point.id,
      x: point.x,
      y: point.y,
      fill,
      highlighted: suggested.has(point.id),
      marker: state.markers.get(point.id) ?? null,
    };
  });
}

/** Tooltip text for one point: the exact estimate payload, one line per
 * class, rendered with JavaScript's round-trip number formatting. */
export function tooltipLines(state: ViewState, pointId: string): string[] {
  const est = state.estimates.get(pointId);
  if (est === undefined) {
    return [pointId, "no estimate"];
  }
  const lines = [pointId];
  est.probabilities.forEach((p, c) => {
    lines.push(`class ${c}: ${String(p)}`);
  });
  lines.push(`received mass: ${String(est.received_mass)}`);
  return lines;
}

/** Wire types of the annotation service's JSON interface. */

export interface PointRow {
  id: string;
  x: number;
  y: number;
}

export interface EstimateRow {
  id: string;
  probabilities: number[];
  received_mass: number;
}

export interface UncertaintyRow {
  id: string;
  class: number;
  lower: number;
  upper: number;
  method: string;
}

export interface SuggestionPoint {
  id: string;
  received_mass: number;
}

export interface Page<T> {
  total: number;
  offset: number;
  limit: number;
  rows: T[];
}

export interface SessionSummary {
  session_id: string;
  n: number;
  d: number;
  num_classes: number;
}

export interface SessionDetail extends SessionSummary {
  annotations: number;
  created: string;
  updated: string;
  config: {
    normalization: string;
    alpha: number;
    tolerance: number;
    lipschitz: number | null;
    graph: { kind: string; k?: number; h?: number };
  };
}

export interface AnnotationResponse {
  sequence_number: number;
  point_id: string;
  estimate: EstimateRow;
  changed_points: number;
}

export type OverlayMode = "estimate-color" | "received-mass" | "ci-width";

export const OVERLAY_MODES: readonly OverlayMode[] = [
  "estimate-color",
  "received-mass",
  "ci-width",
];

/** Session view state.  The store renders only confirmed server state: an
 * annotation's effects appear after the POST succeeds and the follow-up
 * reads land, never optimistically.  Overlay toggles re-render from the
 * cached payloads without touching the network. */

import { ApiClient, ApiError } from "./api.js";
import type {
  EstimateRow,
  OverlayMode,
  PointRow,
  UncertaintyRow,
} from "./types.js";

export interface Marker {
  classIndex: number;
  sequenceNumber: number;
}

export interface ViewState {
  sessionId: string | null;
  numClasses: number;
  points: PointRow[];
  estimates: Map<string, EstimateRow>;
  uncertainty: Map<string, UncertaintyRow[]>;
  suggested: string[];
  markers: Map<string, Marker>;
  selectedClass: number;
  overlay: OverlayMode;
  busy: boolean;
  message: string | null;
  lastError: string | null;
}

export const SUGGESTION_COUNT = 10;

function emptyState(): ViewState {
  return {
    sessionId: null,
    numClasses: 0,
    points: [],
    estimates: new Map(),
    uncertainty: new Map(),
    suggested: [],
    markers: new Map(),
    selectedClass: 0,
    overlay: "estimate-color",
    busy: false,
    message: null,
    lastError: null,
  };
}

function toEstimateMap(rows: EstimateRow[]): Map<string, EstimateRow> {
  return new Map(rows.map((row) => [row.id, row]));
}

function toUncertaintyMap(
  rows: UncertaintyRow[],
): Map<string, UncertaintyRow[]> {
  const byId = new Map<string, UncertaintyRow[]>();
  for (const row of rows) {
    const bucket = byId.get(row.id);
    if (bucket === undefined) {
      byId.set(row.id, [row]);
    } else {
      bucket.push(row);
    }
  }
  return byId;
}

export class SessionStore {
  state: ViewState = emptyState();
  version = 0;
  private listeners: Array<() => void> = [];

  constructor(private readonly api: ApiClient) {}

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private commit(): void {
    this.version += 1;
    for (const listener of this.listeners) {
      listener();
    }
  }

  async load(sessionId: string): Promise<void> {
    const fresh = emptyState();
    fresh.sessionId = sessionId;
    try {
      const detail = await this.api.sessionDetail(sessionId);
      fresh.numClasses = detail.num_classes;
      if (detail.d !== 2) {
        fresh.message =
          `This dataset has d=${detail.d} features; the scatter view ` +
          `only plots 2-D embeddings. Use the CLI to work with this session.`;
        this.state = fresh;
        this.commit();
        return;
      }
      const [points, estimates, uncertainty, suggested] = await Promise.all([
        this.api.points(sessionId),
        this.api.estimates(sessionId),
        this.api.uncertainty(sessionId),
        this.api.suggestions(sessionId, SUGGESTION_COUNT),
      ]);
      fresh.points = points;
      fresh.estimates = toEstimateMap(estimates);
      fresh.uncertainty = toUncertaintyMap(uncertainty);
      fresh.suggested = suggested.map((p) => p.id);
      this.state = fresh;
    } catch (err) {
      fresh.lastError = err instanceof ApiError ? err.detail : String(err);
      this.state = fresh;
    }
    this.commit();
  }

  /** Post one annotation for the selected class, then re-fetch the server's
   * view.  Nothing in the rendered state changes until the server confirms. */
  async annotate(pointId: string): Promise<void> {
    const sessionId = this.state.sessionId;
    if (sessionId === null || this.state.busy) {
      return;
    }
    const classIndex = this.state.selectedClass;
    this.state = { ...this.state, busy: true, lastError: null };
    this.commit();
    try {
      const resp = await this.api.annotateWithRetry(
        sessionId,
        pointId,
        classIndex,
      );
      const [estimates, uncertainty, suggested] = await Promise.all([
        this.api.estimates(sessionId),
        this.api.uncertainty(sessionId),
        this.api.suggestions(sessionId, SUGGESTION_COUNT),
      ]);
      const markers = new Map(this.state.markers);
      markers.set(pointId, {
        classIndex,
        sequenceNumber: resp.sequence_number,
      });
      this.state = {
        ...this.state,
        estimates: toEstimateMap(estimates),
        uncertainty: toUncertaintyMap(uncertainty),
        suggested: suggested.map((p) => p.id),
        markers,
        busy: false,
      };
    } catch (err) {
      this.state = {
        ...this.state,
        busy: false,
        lastError: err instanceof ApiError ? err.detail : String(err),
      };
    }
    this.commit();
  }

  setOverlay(mode: OverlayMode): void {
    this.state = { ...this.state, overlay: mode };
    this.commit();
  }

  selectClass(classIndex: number): void {
    if (classIndex < 0 || classIndex >= this.state.numClasses) {
      return;
    }
    this.state = { ...this.state, selectedClass: classIndex };
    this.commit();
  }

  async followSuggestions(count: number): Promise<void> {
    const sessionId = this.state.sessionId;
    if (sessionId === null) {
      return;
    }
    try {
      const suggested = await this.api.suggestions(sessionId, count);
      this.state = { ...this.state, suggested: suggested.map((p) => p.id) };
    } catch (err) {
      this.state = {
        ...this.state,
        lastError: err instanceof ApiError ? err.detail : String(err),
      };
    }
    this.commit();
  }
}

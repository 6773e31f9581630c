/** Typed client for the annotation service.  All reads page through the
 * server's offset/limit windows; writes retry on 409 writer conflicts
 * (the server rejects without applying, so a retry records exactly one
 * annotation once it succeeds). */

import type {
  AnnotationResponse,
  EstimateRow,
  Page,
  PointRow,
  SessionDetail,
  SessionSummary,
  SuggestionPoint,
  UncertaintyRow,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export interface RetryPolicy {
  retries: number;
  delayMs: number;
}

export const DEFAULT_RETRY: RetryPolicy = { retries: 5, delayMs: 25 };

const PAGE_LIMIT = 1000;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body: unknown = await resp.json();
        if (
          typeof body === "object" &&
          body !== null &&
          "detail" in body &&
          typeof (body as { detail: unknown }).detail === "string"
        ) {
          detail = (body as { detail: string }).detail;
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  private async allPages<T>(path: string): Promise<T[]> {
    const rows: T[] = [];
    let offset = 0;
    for (;;) {
      const page = await this.request<Page<T>>(
        `${path}?offset=${offset}&limit=${PAGE_LIMIT}`,
      );
      rows.push(...page.rows);
      offset += page.rows.length;
      if (offset >= page.total || page.rows.length === 0) {
        return rows;
      }
    }
  }

  createSession(body: unknown): Promise<SessionSummary> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  sessionDetail(sessionId: string): Promise<SessionDetail> {
    return this.request(`/sessions/${sessionId}`);
  }

  points(sessionId: string): Promise<PointRow[]> {
    return this.allPages(`/sessions/${sessionId}/points`);
  }

  estimates(sessionId: string): Promise<EstimateRow[]> {
    return this.allPages(`/sessions/${sessionId}/estimates`);
  }

  uncertainty(sessionId: string): Promise<UncertaintyRow[]> {
    return this.allPages(`/sessions/${sessionId}/uncertainty`);
  }

  async suggestions(
    sessionId: string,
    count: number,
  ): Promise<SuggestionPoint[]> {
    const body = await this.request<{ points: SuggestionPoint[] }>(
      `/sessions/${sessionId}/suggestions?count=${count}`,
    );
    return body.points;
  }

  annotate(
    sessionId: string,
    pointId: string,
    classIndex: number,
  ): Promise<AnnotationResponse> {
    return this.request(`/sessions/${sessionId}/annotations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ point_id: pointId, class_index: classIndex }),
    });
  }

  /** Retry 409 writer conflicts; every other failure propagates.  A 409
   * means the annotation was NOT applied, so retrying cannot double-record. */
  async annotateWithRetry(
    sessionId: string,
    pointId: string,
    classIndex: number,
    policy: RetryPolicy = DEFAULT_RETRY,
  ): Promise<AnnotationResponse> {
    for (let attempt = 0; ; attempt++) {
      try {
        return await this.annotate(sessionId, pointId, classIndex);
      } catch (err) {
        if (
          err instanceof ApiError &&
          err.status === 409 &&
          attempt < policy.retries
        ) {
          await sleep(policy.delayMs);
          continue;
        }
        throw err;
      }
    }
  }
}

/** Typed client for the hub's HTTP API. Each logical resource keeps at
 * most one request in flight; a newer fetch aborts the superseded one. */

import type { Bbox, FeatureCollection, Filters, ThresholdSet } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Filters (and the optional viewport bbox) rendered as the query
 * string the server documents; empty string when nothing is active. */
export function potholesQuery(filters: Filters, viewport: Bbox | null): string {
  const q = new URLSearchParams();
  if (filters.minSeverity) q.set("min_severity", filters.minSeverity);
  if (filters.sinceMs !== null) q.set("since_ms", String(filters.sinceMs));
  if (filters.bboxFromViewport && viewport) {
    q.set(
      "bbox",
      [viewport.minLon, viewport.minLat, viewport.maxLon, viewport.maxLat].join(","),
    );
  }
  const s = q.toString();
  return s ? `?${s}` : "";
}

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") return body.error;
  } catch {
    // fall through to the status line
  }
  return `HTTP ${resp.status}`;
}

export class ApiClient {
  private inflight = new Map<string, AbortController>();

  constructor(public readonly baseUrl: string) {}

  private async getJson<T>(key: string, path: string): Promise<T> {
    this.inflight.get(key)?.abort();
    const ctl = new AbortController();
    this.inflight.set(key, ctl);
    try {
      const resp = await fetch(this.baseUrl + path, { signal: ctl.signal });
      if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
      return (await resp.json()) as T;
    } finally {
      if (this.inflight.get(key) === ctl) this.inflight.delete(key);
    }
  }

  async version(): Promise<number> {
    const body = await this.getJson<{ version: number }>("version", "/api/v1/version");
    return body.version;
  }

  potholesGeojson(filters: Filters, viewport: Bbox | null): Promise<FeatureCollection> {
    const path = `/api/v1/potholes.geojson${potholesQuery(filters, viewport)}`;
    return this.getJson<FeatureCollection>("potholes", path);
  }

  thresholds(): Promise<ThresholdSet> {
    return this.getJson<ThresholdSet>("thresholds", "/api/v1/thresholds");
  }

  async putThresholds(t: ThresholdSet): Promise<ThresholdSet> {
    const resp = await fetch(`${this.baseUrl}/api/v1/thresholds`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(t),
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
    return (await resp.json()) as ThresholdSet;
  }
}

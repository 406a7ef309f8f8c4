/** Thin typed client over the review service HTTP API. */

import type {
  FeatureCollection,
  OutageListItem,
  PredictionRecord,
  Stats,
  Verdict,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, `${init?.method ?? "GET"} ${path}: ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  listOutages(offset = 0, limit = 1000): Promise<OutageListItem[]> {
    return this.request(`/outages?offset=${offset}&limit=${limit}`);
  }

  async layers(outageId: string): Promise<{ collection: FeatureCollection; etag: string | null }> {
    const resp = await this.fetchImpl(`${this.baseUrl}/outages/${outageId}/layers`);
    if (!resp.ok) {
      throw new ApiError(resp.status, `GET layers: ${resp.status}`);
    }
    return {
      collection: (await resp.json()) as FeatureCollection,
      etag: resp.headers.get("ETag"),
    };
  }

  predictManual(outageId: string, epsM: number, minPts: number): Promise<PredictionRecord> {
    return this.request(`/outages/${outageId}/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ eps_m: epsM, min_pts: minPts }),
    });
  }

  predictAuto(outageId: string, seed: number): Promise<PredictionRecord> {
    return this.request(`/outages/${outageId}/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ auto: true, seed }),
    });
  }

  submitVerdict(
    outageId: string,
    verdict: Verdict,
    reviewer: string,
    note?: string,
  ): Promise<unknown> {
    return this.request(`/outages/${outageId}/verdict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ verdict, reviewer, note: note ?? null }),
    });
  }

  stats(): Promise<Stats> {
    return this.request("/stats");
  }
}

// Typed client for the gateway endpoints (the only ones the UI talks to).

import { GeoBBox } from "./geo.js";
import { ApiError, BridgeDetail, BridgeRecord, DefectRecord } from "./types.js";

export class ApiFailure extends Error {
  constructor(readonly error: ApiError) {
    super(`${error.code}: ${error.message}`);
  }
}

export function bboxQuery(bbox: GeoBBox | null): string {
  if (bbox === null) return "";
  const p = new URLSearchParams({
    min_lat: String(bbox.minLat),
    min_lon: String(bbox.minLon),
    max_lat: String(bbox.maxLat),
    max_lon: String(bbox.maxLon),
  });
  return `?${p.toString()}`;
}

async function getJson<T>(url: string, fetcher: typeof fetch): Promise<T> {
  const response = await fetcher(url);
  const body = await response.json();
  if (!response.ok) throw new ApiFailure(body as ApiError);
  return body as T;
}

export class ApiClient {
  constructor(
    private readonly base = "",
    private readonly fetcher: typeof fetch = fetch,
  ) {}

  bridges(bbox: GeoBBox | null = null): Promise<BridgeRecord[]> {
    return getJson(`${this.base}/api/bridges${bboxQuery(bbox)}`, this.fetcher);
  }

  bridge(id: string): Promise<BridgeDetail> {
    return getJson(`${this.base}/api/bridges/${encodeURIComponent(id)}`, this.fetcher);
  }

  defects(bbox: GeoBBox): Promise<DefectRecord[]> {
    return getJson(`${this.base}/api/defects${bboxQuery(bbox)}`, this.fetcher);
  }

  mapImageUrl(mapId: string): string {
    return `${this.base}/api/maps/${encodeURIComponent(mapId)}/image`;
  }

  defectImageUrl(defectId: string): string {
    return `${this.base}/api/defects/${encodeURIComponent(defectId)}/image`;
  }
}

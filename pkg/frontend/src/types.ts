// Wire types of the deckfuse gateway API.

export interface GeoPoint {
  lat: number;
  lon: number;
}

export interface GeoBBox {
  minLat: number;
  minLon: number;
  maxLat: number;
  maxLon: number;
}

export interface BridgeRecord {
  bridge_id: string;
  name: string;
  lat: number;
  lon: number;
  condition: "Good" | "Fair" | "Poor";
  surface_map_ids: string[];
}

export interface SurfaceMapMeta {
  map_id: string;
  bridge_id: string;
  phase: 1 | 2;
  sensor: string;
  anchor_lat: number;
  anchor_lon: number;
  anchor_row: number;
  anchor_col: number;
  gsd_m: number;
  rows: number;
  cols: number;
}

export interface BridgeDetail extends BridgeRecord {
  surface_maps: SurfaceMapMeta[];
}

export interface DefectRecord {
  defect_id: string;
  bridge_id: string;
  lat: number;
  lon: number;
  defect_type: string;
  sensor: string;
  note: string;
  image_id: string | null;
}

export interface ApiError {
  status: number;
  code: string;
  message: string;
}

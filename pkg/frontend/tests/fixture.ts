// Mirrors the gateway's seeded five-bridge test store (one Poor bridge with
// three surface maps and two defects).

import { BridgeDetail, BridgeRecord, DefectRecord, SurfaceMapMeta } from "../src/types.js";

export const BRIDGES: BridgeRecord[] = [
  { bridge_id: "br-001", name: "I-80 over Salt Creek", lat: 40.82, lon: -96.71, condition: "Good", surface_map_ids: [] },
  { bridge_id: "br-002", name: "US-77 overpass", lat: 40.801, lon: -96.7005, condition: "Fair", surface_map_ids: [] },
  {
    bridge_id: "br-003",
    name: "N 27th St bridge",
    lat: 40.815,
    lon: -96.68,
    condition: "Poor",
    surface_map_ids: ["br-003-map-1", "br-003-map-2", "br-003-map-3"],
  },
  { bridge_id: "br-004", name: "Rokeby Rd crossing", lat: 40.74, lon: -96.655, condition: "Good", surface_map_ids: [] },
  { bridge_id: "br-005", name: "Superior St bridge", lat: 40.855, lon: -96.69, condition: "Fair", surface_map_ids: [] },
];

function meta(mapId: string, phase: 1 | 2, sensor: string): SurfaceMapMeta {
  return {
    map_id: mapId,
    bridge_id: "br-003",
    phase,
    sensor,
    anchor_lat: 40.8151,
    anchor_lon: -96.6801,
    anchor_row: 20,
    anchor_col: 30,
    gsd_m: 0.05,
    rows: 40,
    cols: 60,
  };
}

export const BRIDGE_DETAIL: BridgeDetail = {
  ...BRIDGES[2],
  surface_maps: [
    meta("br-003-map-1", 1, "optical"),
    meta("br-003-map-2", 1, "infrared"),
    meta("br-003-map-3", 2, "hammer_sounding"),
  ],
};

export const DEFECTS: DefectRecord[] = [
  {
    defect_id: "br-003-defect-0001",
    bridge_id: "br-003",
    lat: 40.81505,
    lon: -96.68005,
    defect_type: "delamination",
    sensor: "hammer_sounding",
    note: "hollow response near centerline",
    image_id: "br-003-defect-0001",
  },
  {
    defect_id: "br-003-defect-0002",
    bridge_id: "br-003",
    lat: 40.81512,
    lon: -96.6799,
    defect_type: "crack",
    sensor: "optical",
    note: "transverse crack, 1.2 m",
    image_id: null,
  },
];

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

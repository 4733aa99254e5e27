// Pure view-model builders: what the popup and detail panel must show.

import { ApiClient } from "./api.js";
import { BridgeDetail, BridgeRecord, DefectRecord } from "./types.js";

export const FLAG_COLORS: Record<BridgeRecord["condition"], string> = {
  Good: "green",
  Fair: "yellow",
  Poor: "red",
};

export function flagColor(condition: BridgeRecord["condition"]): string {
  return FLAG_COLORS[condition];
}

export interface MapListing {
  mapId: string;
  label: string;
  imageUrl: string;
}

export interface BridgePopupModel {
  title: string;
  condition: string;
  color: string;
  maps: MapListing[];
}

// flag click: name, condition, and every surface map labeled by phase/sensor
export function bridgePopupModel(detail: BridgeDetail, api: ApiClient): BridgePopupModel {
  return {
    title: detail.name,
    condition: detail.condition,
    color: flagColor(detail.condition),
    maps: detail.surface_maps.map((m) => ({
      mapId: m.map_id,
      label: `phase ${m.phase} · ${m.sensor}`,
      imageUrl: api.mapImageUrl(m.map_id),
    })),
  };
}

export interface DefectDetailModel {
  title: string;
  sensor: string;
  note: string;
  imageUrl: string | null;
}

// marker click: defect type, sensor, note, close-up image when present
export function defectDetailModel(defect: DefectRecord, api: ApiClient): DefectDetailModel {
  return {
    title: defect.defect_type,
    sensor: defect.sensor,
    note: defect.note,
    imageUrl: defect.image_id === null ? null : api.defectImageUrl(defect.defect_id),
  };
}

// Client state and the pure decision rules the UI behavior hangs on.

import { bboxCovers, GeoBBox } from "./geo.js";
import { GeoPoint } from "./types.js";

// zoom threshold: defect markers appear when the viewport spans less ground
// than this ("meter level" operationalized; configurable)
export const MARKER_SPAN_THRESHOLD_M = 250;

export interface ViewportState {
  center: GeoPoint;
  spanM: number;
  selectedBridge: string | null;
  selectedDefect: string | null;
}

export function markersVisible(spanM: number, thresholdM = MARKER_SPAN_THRESHOLD_M): boolean {
  return spanM < thresholdM;
}

// fetch cache policy: refetch only when the needed bbox leaves the cached one
export function needsRefetch(cached: GeoBBox | null, needed: GeoBBox): boolean {
  return cached === null || !bboxCovers(cached, needed);
}

// guard against out-of-order responses: only the latest request may apply
export class RequestSequencer {
  private seq = 0;

  next(): number {
    return ++this.seq;
  }

  isCurrent(token: number): boolean {
    return token === this.seq;
  }
}

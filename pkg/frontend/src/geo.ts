// Linear viewport transforms between WGS84 and a local plane in meters.
//
// The reference point and its cosine are fixed at first load, so every
// mapping here is a plain linear transform; geo-referencing truth stays on
// the server side.

import { GeoBBox, GeoPoint } from "./types.js";

export type { GeoBBox } from "./types.js";

const EARTH_RADIUS_M = 6378137.0;
const DEG = Math.PI / 180.0;

export interface PlaneProjection {
  reference: GeoPoint;
  toPlane(p: GeoPoint): { east: number; north: number };
  toGeo(east: number, north: number): GeoPoint;
}

export function planeProjection(reference: GeoPoint): PlaneProjection {
  const kNorth = DEG * EARTH_RADIUS_M;
  const kEast = DEG * EARTH_RADIUS_M * Math.cos(reference.lat * DEG);
  return {
    reference,
    toPlane(p: GeoPoint) {
      return {
        east: (p.lon - reference.lon) * kEast,
        north: (p.lat - reference.lat) * kNorth,
      };
    },
    toGeo(east: number, north: number): GeoPoint {
      return {
        lat: reference.lat + north / kNorth,
        lon: reference.lon + east / kEast,
      };
    },
  };
}

export interface Viewport {
  center: GeoPoint;
  spanM: number; // ground meters covered by the canvas width
}

// bbox of the viewport rectangle, padded by `factor` of its size
export function viewportBBox(
  proj: PlaneProjection,
  view: Viewport,
  aspect: number,
  factor = 0,
): GeoBBox {
  const c = proj.toPlane(view.center);
  const halfW = (view.spanM / 2) * (1 + factor);
  const halfH = ((view.spanM / aspect) / 2) * (1 + factor);
  const sw = proj.toGeo(c.east - halfW, c.north - halfH);
  const ne = proj.toGeo(c.east + halfW, c.north + halfH);
  return { minLat: sw.lat, minLon: sw.lon, maxLat: ne.lat, maxLon: ne.lon };
}

export function bboxCovers(outer: GeoBBox, inner: GeoBBox): boolean {
  return (
    outer.minLat <= inner.minLat &&
    outer.minLon <= inner.minLon &&
    outer.maxLat >= inner.maxLat &&
    outer.maxLon >= inner.maxLon
  );
}

// canvas pixel position of a geo point for a given viewport and canvas size
export function toScreen(
  proj: PlaneProjection,
  view: Viewport,
  width: number,
  height: number,
  p: GeoPoint,
): { x: number; y: number } {
  const scale = width / view.spanM; // px per meter
  const c = proj.toPlane(view.center);
  const q = proj.toPlane(p);
  return {
    x: width / 2 + (q.east - c.east) * scale,
    y: height / 2 - (q.north - c.north) * scale,
  };
}

export function fromScreen(
  proj: PlaneProjection,
  view: Viewport,
  width: number,
  height: number,
  x: number,
  y: number,
): GeoPoint {
  const scale = width / view.spanM;
  const c = proj.toPlane(view.center);
  return proj.toGeo(c.east + (x - width / 2) / scale, c.north - (y - height / 2) / scale);
}

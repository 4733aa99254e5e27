"""WGS84 <-> local east-north tangent plane conversion and bbox predicates.

A spherical equirectangular approximation (R = 6378137 m) is used: over a
bridge-deck extent the error is sub-centimeter, far below GPS noise. The cos
term is fixed at the anchor latitude so the mapping is exactly invertible.
Antimeridian and polar cases are rejected, not handled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OutOfRange

EARTH_RADIUS_M = 6378137.0

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 position in degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of [-90, 90]: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of [-180, 180]: {self.lon}")


@dataclass(frozen=True)
class LocalPoint:
    """East/north offset in meters relative to a declared anchor GeoPoint."""

    east: float
    north: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.east) and math.isfinite(self.north)):
            raise ValueError("local coordinates must be finite")


@dataclass(frozen=True)
class GeoBBox:
    """Axis-aligned geographic box; antimeridian wrap unsupported."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self) -> None:
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise ValueError("bbox min must not exceed max")


def to_local(p: GeoPoint, anchor: GeoPoint) -> LocalPoint:
    """Project a nearby GeoPoint onto the anchor's east-north tangent plane.

    Requires |dlat| < 1 deg and |dlon| < 1 deg (bridge scale); raises
    OutOfRange otherwise.
    """
    dlat = p.lat - anchor.lat
    dlon = p.lon - anchor.lon
    if abs(dlat) >= 1.0 or abs(dlon) >= 1.0:
        raise OutOfRange(f"point more than 1 degree from anchor: {p} vs {anchor}")
    north = dlat * _DEG * EARTH_RADIUS_M
    east = dlon * _DEG * EARTH_RADIUS_M * math.cos(anchor.lat * _DEG)
    return LocalPoint(east=east, north=north)


def to_geo(p: LocalPoint, anchor: GeoPoint) -> GeoPoint:
    """Exact algebraic inverse of to_local at the same anchor.

    Requires |east| and |north| below 100 km; raises OutOfRange otherwise.
    """
    if abs(p.east) >= 100_000.0 or abs(p.north) >= 100_000.0:
        raise OutOfRange(f"local offset beyond 100 km: {p}")
    lat = anchor.lat + p.north / (_DEG * EARTH_RADIUS_M)
    lon = anchor.lon + p.east / (_DEG * EARTH_RADIUS_M * math.cos(anchor.lat * _DEG))
    return GeoPoint(lat=lat, lon=lon)


def bbox_contains(b: GeoBBox, p: GeoPoint) -> bool:
    """Boundary-inclusive containment test."""
    return b.min_lat <= p.lat <= b.max_lat and b.min_lon <= p.lon <= b.max_lon


@dataclass(frozen=True)
class ImageGeoTag:
    """GPS record attached to an image at capture time."""

    lat: float
    lon: float
    alt_m: float
    heading_deg: float
    timestamp: str

    def point(self) -> GeoPoint:
        return GeoPoint(lat=self.lat, lon=self.lon)

"""Inverse perspective mapping between ground plane and tilted camera pixels.

The camera model is equiangular: pixel row u subtends the depression angle
(theta - alpha) + u * 2*alpha/(m-1) below horizontal and column v subtends the
azimuth (gamma - alpha) + v * 2*alpha/(n-1), so the scale terms are linear in
angle. The forward map uses atan2(h, rho) rather than the ratio form with a
(y - d) denominator, which is algebraically identical off the optical-axis
column and continuous through it.

Rays may dip past the vertical (depression > 90 degrees) when theta + alpha
exceeds 90 degrees; a ground point then enters the image through the
reflected representation (pi - depression, azimuth + pi). Both
representations are checked so the forward map stays the exact inverse of
ground_of_pixel over the whole pixel grid, including nadir rigs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, FootprintUnbounded, PreconditionViolation
from .geodesy import LocalPoint
from .raster import Raster, sample_bilinear_grid

# Angular slack at the field boundary so edge rows/columns are
# deterministically in-view.
BOUNDARY_TOL_RAD = 1e-9


@dataclass(frozen=True)
class CameraRig:
    """One shot's camera parameters.

    l/d/h place the camera in world meters (east, north, height above the
    deck plane); theta is the optical-axis depression below horizontal,
    gamma the yaw about vertical, alpha the half-aperture (full field of
    view is 2*alpha on both axes); the image is m rows by n columns.
    """

    l: float
    d: float
    h: float
    theta: float
    gamma: float
    alpha: float
    m: int
    n: int

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise ValueError("camera height must be positive")
        if not (0.0 < self.alpha < math.pi / 2):
            raise ValueError("aperture must lie in (0, pi/2)")
        if not (0.0 < self.theta <= math.pi / 2):
            raise ValueError("pitch must lie in (0, pi/2]")
        if self.m < 2 or self.n < 2:
            raise ValueError("image must be at least 2x2")

    @property
    def row_scale(self) -> float:
        """Radians of depression per pixel row."""
        return 2.0 * self.alpha / (self.m - 1)

    @property
    def col_scale(self) -> float:
        """Radians of azimuth per pixel column."""
        return 2.0 * self.alpha / (self.n - 1)


@dataclass(frozen=True)
class GroundPoint:
    """Position on the deck plane: x east, y north, in meters."""

    x: float
    y: float


@dataclass(frozen=True)
class SourcePixel:
    """Subpixel position in a source image: u row, v column."""

    u: float
    v: float


@dataclass(frozen=True)
class OrthoGrid:
    """Target grid for orthophoto rendering.

    origin is the ground position of pixel (row 0, col 0); the row axis
    points south (decreasing north) and the column axis east, so raster row
    order matches north-up map display.
    """

    origin: LocalPoint
    gsd: float
    rows: int
    cols: int

    def __post_init__(self) -> None:
        if self.gsd <= 0:
            raise ValueError("gsd must be positive")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must be at least 1x1")

    def ground_of_cell(self, row: float, col: float) -> GroundPoint:
        """Ground position of a grid cell."""
        return GroundPoint(
            x=self.origin.east + col * self.gsd,
            y=self.origin.north - row * self.gsd,
        )


def _wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def ipm_pixel(rig: CameraRig, g: GroundPoint) -> Optional[SourcePixel]:
    """Map a ground point to the source pixel that sees it; None if out of view.

    Out of view covers: the point directly under the camera (range zero),
    azimuth beyond the field (points behind the camera resolve to azimuths
    past +-90 degrees and drop out rather than aliasing), and depressions
    outside the row window. Edge rows/columns within BOUNDARY_TOL_RAD of the
    field boundary are clamped in-view.
    """
    dx = g.x - rig.l
    dy = g.y - rig.d
    rho = math.sqrt(dx * dx + dy * dy)
    if rho == 0.0:
        return None
    dep = math.atan2(rig.h, rho)
    az = math.atan2(dy, dx)

    lo = rig.theta - rig.alpha
    hi = rig.theta + rig.alpha
    for dep_k, az_k in ((dep, az), (math.pi - dep, az + math.pi)):
        delta = _wrap_angle(az_k - rig.gamma)
        if abs(delta) > rig.alpha + BOUNDARY_TOL_RAD:
            continue
        if dep_k < lo - BOUNDARY_TOL_RAD or dep_k > hi + BOUNDARY_TOL_RAD:
            continue
        u = (dep_k - lo) / rig.row_scale
        v = (delta + rig.alpha) / rig.col_scale
        return SourcePixel(
            u=min(max(u, 0.0), float(rig.m - 1)),
            v=min(max(v, 0.0), float(rig.n - 1)),
        )
    return None


def ipm_grid(rig: CameraRig, xs: np.ndarray, ys: np.ndarray):
    """Vectorized ipm_pixel over arrays of ground coordinates.

    Returns (u, v, in_view); u/v at out-of-view positions are zero.
    """
    dx = np.asarray(xs, dtype=np.float64) - rig.l
    dy = np.asarray(ys, dtype=np.float64) - rig.d
    rho = np.sqrt(dx * dx + dy * dy)
    dep = np.arctan2(rig.h, rho)
    az = np.arctan2(dy, dx)

    lo = rig.theta - rig.alpha
    hi = rig.theta + rig.alpha
    u = np.zeros_like(rho)
    v = np.zeros_like(rho)
    in_view = np.zeros(rho.shape, dtype=bool)
    for dep_k, az_k in ((dep, az), (math.pi - dep, az + math.pi)):
        delta = (az_k - rig.gamma + math.pi) % (2.0 * math.pi) - math.pi
        fits = (
            (rho > 0.0)
            & ~in_view
            & (np.abs(delta) <= rig.alpha + BOUNDARY_TOL_RAD)
            & (dep_k >= lo - BOUNDARY_TOL_RAD)
            & (dep_k <= hi + BOUNDARY_TOL_RAD)
        )
        u = np.where(fits, np.clip((dep_k - lo) / rig.row_scale, 0.0, rig.m - 1), u)
        v = np.where(fits, np.clip((delta + rig.alpha) / rig.col_scale, 0.0, rig.n - 1), v)
        in_view |= fits
    return u, v, in_view


def ground_of_pixel(rig: CameraRig, u: float, v: float) -> Optional[GroundPoint]:
    """Ground intersection of the ray through pixel (u, v); None at/above horizon.

    Raises PreconditionViolation outside the pixel grid. Rows whose viewing
    angle reaches exactly the vertical intersect at the nadir (range-zero
    limit of h/tan).
    """
    if not (0.0 <= u <= rig.m - 1 and 0.0 <= v <= rig.n - 1):
        raise PreconditionViolation(f"pixel ({u}, {v}) outside {rig.m}x{rig.n} grid")
    a_u = (rig.theta - rig.alpha) + u * rig.row_scale
    if a_u <= 0.0:
        return None
    az = (rig.gamma - rig.alpha) + v * rig.col_scale
    if abs(a_u - math.pi / 2) <= 1e-12:
        rho = 0.0
    else:
        rho = rig.h / math.tan(a_u)
    return GroundPoint(x=rig.l + rho * math.cos(az), y=rig.d + rho * math.sin(az))


def ground_footprint(rig: CameraRig) -> Optional[list[GroundPoint]]:
    """Ground quadrilateral seen by the image corners; None when unbounded.

    Corner order: (row 0, col 0), (row 0, col n-1), (row m-1, col n-1),
    (row m-1, col 0). The footprint is unbounded when the top row reaches
    the horizon (theta - alpha <= 0).
    """
    if rig.theta - rig.alpha <= 0.0:
        return None
    corners = [(0, 0), (0, rig.n - 1), (rig.m - 1, rig.n - 1), (rig.m - 1, 0)]
    return [ground_of_pixel(rig, float(u), float(v)) for u, v in corners]


def render_orthophoto(rig: CameraRig, src: Raster, grid: OrthoGrid) -> Raster:
    """Resample a perspective view onto a metric ground grid.

    Each output cell's ground position is mapped through the forward model
    and bilinearly sampled from src; cells that fall out of view (or hit
    masked source data) come back mask-invalid. Raises DimensionMismatch when
    src does not match the rig's (m, n).
    """
    if (src.height, src.width) != (rig.m, rig.n):
        raise DimensionMismatch(
            f"source is {src.height}x{src.width}, rig expects {rig.m}x{rig.n}"
        )
    cols = np.arange(grid.cols, dtype=np.float64)
    rows = np.arange(grid.rows, dtype=np.float64)
    xs = grid.origin.east + cols[None, :] * grid.gsd
    ys = grid.origin.north - rows[:, None] * grid.gsd
    xs, ys = np.broadcast_arrays(xs, ys)

    u, v, in_view = ipm_grid(rig, xs, ys)
    samples, ok = sample_bilinear_grid(src, v, u)
    valid = in_view & ok
    px = np.clip(np.rint(samples), 0, 255).astype(np.uint8)
    px[~valid] = 0
    return Raster(grid.cols, grid.rows, src.channels, px, valid)


def grid_for_footprint(rig: CameraRig, gsd: float) -> OrthoGrid:
    """Smallest south/east-aligned grid covering the rig's ground footprint.

    Raises FootprintUnbounded when the rig sees the horizon.
    """
    corners = ground_footprint(rig)
    if corners is None:
        raise FootprintUnbounded("top image row reaches the horizon")
    xs = [c.x for c in corners]
    ys = [c.y for c in corners]
    cols = int(math.ceil((max(xs) - min(xs)) / gsd)) + 1
    rows = int(math.ceil((max(ys) - min(ys)) / gsd)) + 1
    return OrthoGrid(
        origin=LocalPoint(east=min(xs), north=max(ys)), gsd=gsd, rows=rows, cols=cols
    )


def footprint_near_width(rig: CameraRig) -> float:
    """Ground width of the bottom image row (the sharpest one)."""
    corners = ground_footprint(rig)
    if corners is None:
        raise FootprintUnbounded("top image row reaches the horizon")
    _, _, near_r, near_l = corners
    return math.hypot(near_r.x - near_l.x, near_r.y - near_l.y)


def along_track_smear(rig: CameraRig, rho: float) -> float:
    """Ground meters covered by one pixel row at range rho from the nadir."""
    return rig.row_scale * (rig.h * rig.h + rho * rho) / rig.h


def default_mosaic_gsd(rig: CameraRig) -> float:
    """Cross-track resolution at the far footprint edge.

    The conservative (Nyquist at the coarsest column) choice for mosaics
    built from this rig; raises FootprintUnbounded for horizon-seeing rigs.
    """
    if rig.theta - rig.alpha <= 0.0:
        raise FootprintUnbounded("top image row reaches the horizon")
    return rig.col_scale * rig.h / math.tan(rig.theta - rig.alpha)


def sharpness_range_limit(rig: CameraRig, gsd: float, max_smear_factor: float) -> float:
    """Largest range whose along-track smear stays within factor * gsd.

    Clamped to the footprint's radial extent; never below the near edge, so
    a usable band always remains.
    """
    if rig.theta - rig.alpha <= 0.0:
        raise FootprintUnbounded("top image row reaches the horizon")
    rho_far = rig.h / math.tan(rig.theta - rig.alpha)
    if rig.theta + rig.alpha >= math.pi / 2:
        rho_near = 0.0
    else:
        rho_near = rig.h / math.tan(rig.theta + rig.alpha)
    limit2 = max_smear_factor * gsd * rig.h / rig.row_scale - rig.h * rig.h
    rho_max = math.sqrt(limit2) if limit2 > 0 else 0.0
    return min(rho_far, max(rho_max, rho_near + 20.0 * gsd))


def grid_for_wedge(rig: CameraRig, gsd: float, rho_limit: float) -> OrthoGrid:
    """Grid covering the in-view wedge out to rho_limit from the nadir."""
    if rig.theta - rig.alpha <= 0.0:
        raise FootprintUnbounded("top image row reaches the horizon")
    if rig.theta + rig.alpha >= math.pi / 2:
        rho_near = 0.0
    else:
        rho_near = rig.h / math.tan(rig.theta + rig.alpha)
    rho_far = min(rig.h / math.tan(rig.theta - rig.alpha), rho_limit)
    az = rig.gamma + np.linspace(-rig.alpha, rig.alpha, 33)
    xs = np.concatenate([rig.l + r * np.cos(az) for r in (rho_near, rho_far)])
    ys = np.concatenate([rig.d + r * np.sin(az) for r in (rho_near, rho_far)])
    cols = int(math.ceil((xs.max() - xs.min()) / gsd)) + 1
    rows = int(math.ceil((ys.max() - ys.min()) / gsd)) + 1
    return OrthoGrid(
        origin=LocalPoint(east=float(xs.min()), north=float(ys.max())),
        gsd=gsd,
        rows=rows,
        cols=cols,
    )


def apply_range_mask(ortho: Raster, grid: OrthoGrid, rig: CameraRig, rho_limit: float) -> Raster:
    """Invalidate orthophoto cells beyond rho_limit from the camera nadir."""
    cols = np.arange(grid.cols, dtype=np.float64)[None, :]
    rows = np.arange(grid.rows, dtype=np.float64)[:, None]
    dx = grid.origin.east + cols * grid.gsd - rig.l
    dy = grid.origin.north - rows * grid.gsd - rig.d
    keep = dx * dx + dy * dy <= (rho_limit + 0.5 * grid.gsd) ** 2
    return ortho.with_mask(ortho.valid_mask() & keep)


def plan_flight_height(deck_width: float, alpha: float, n: int) -> tuple[float, float]:
    """Nadir single-shot coverage: flight height and gsd for a deck width.

    height = deck_width / (2 tan alpha); gsd = deck_width / n.
    """
    if deck_width <= 0:
        raise PreconditionViolation("deck width must be positive")
    if not (0.0 < alpha < math.pi / 2):
        raise PreconditionViolation("aperture must lie in (0, pi/2)")
    if n < 2:
        raise PreconditionViolation("need at least 2 columns")
    return deck_width / (2.0 * math.tan(alpha)), deck_width / n


# --- camera parameter files -------------------------------------------------

CAMERA_KEYS = ("l_m", "d_m", "h_m", "pitch_deg", "yaw_deg", "aperture_deg", "rows", "cols")


def rig_from_dict(params: dict) -> CameraRig:
    """Build a CameraRig from the flat key/value camera record (degrees in file)."""
    missing = [k for k in CAMERA_KEYS if k not in params]
    if missing:
        raise ValueError(f"camera record missing keys: {missing}")
    return CameraRig(
        l=float(params["l_m"]),
        d=float(params["d_m"]),
        h=float(params["h_m"]),
        theta=math.radians(float(params["pitch_deg"])),
        gamma=math.radians(float(params["yaw_deg"])),
        alpha=math.radians(float(params["aperture_deg"])),
        m=int(params["rows"]),
        n=int(params["cols"]),
    )


def rig_to_dict(rig: CameraRig) -> dict:
    """Serialize a CameraRig to the flat camera record (degrees in file)."""
    return {
        "l_m": rig.l,
        "d_m": rig.d,
        "h_m": rig.h,
        "pitch_deg": math.degrees(rig.theta),
        "yaw_deg": math.degrees(rig.gamma),
        "aperture_deg": math.degrees(rig.alpha),
        "rows": rig.m,
        "cols": rig.n,
    }


def load_camera_file(text: str) -> CameraRig:
    """Parse a camera parameter JSON document."""
    return rig_from_dict(json.loads(text))

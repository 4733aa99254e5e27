"""Synthetic deck scenes, tilted camera views, and two-phase flight datasets.

pinhole_project is the independent cross-check for the trigonometric forward
mapping in the projection module: it rotates the camera-to-ground ray with
explicit matrices and converts the resulting direction to pixels through the
equiangular grid (asin of the vertical component instead of atan of a ground
ratio). The two implementations share no code path.

Everything here is seed-deterministic: identical seeds produce byte-identical
textures, views and geotags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import FootprintUnbounded
from .geodesy import GeoPoint, ImageGeoTag, LocalPoint, to_geo
from .projection import (
    BOUNDARY_TOL_RAD,
    CameraRig,
    GroundPoint,
    SourcePixel,
    ground_footprint,
)
from .raster import Raster, sample_bilinear_grid

SKY_VALUE = 200

DEFAULT_ANCHOR = GeoPoint(lat=40.8, lon=-96.7)


@dataclass(frozen=True)
class DeckExtent:
    """Ground rectangle spanned by a scene texture, in meters."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("extent must have positive area")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def width(self) -> float:
        return self.y_max - self.y_min


@dataclass
class GroundScene:
    """Known ground truth: a textured deck plus annotated defect positions.

    extent is the full textured rectangle; deck, when set, is the inner
    region of interest that flights must cover (the texture may carry a
    shoulder margin around it).
    """

    texture: Raster
    extent: DeckExtent
    defects: list[tuple[GroundPoint, str]] = field(default_factory=list)
    anchor: GeoPoint = DEFAULT_ANCHOR
    deck: Optional[DeckExtent] = None

    @property
    def coverage(self) -> DeckExtent:
        return self.deck or self.extent

    @property
    def texel_x(self) -> float:
        return self.extent.length / self.texture.width

    @property
    def texel_y(self) -> float:
        return self.extent.width / self.texture.height

    def texture_coords(self, xs: np.ndarray, ys: np.ndarray):
        """Ground meters -> texture (col, row) subpixel coordinates."""
        cols = (np.asarray(xs) - self.extent.x_min) / self.texel_x - 0.5
        rows = (self.extent.y_max - np.asarray(ys)) / self.texel_y - 0.5
        return cols, rows


@dataclass
class FlightPlan:
    """Camera positions of one pass plus the geometry they were derived from."""

    rig: CameraRig
    waypoints: list[tuple[float, float]]
    headings: list[float]
    overlap: float
    spacing_m: float
    footprint_len_m: float


def _yaw_matrix(gamma: float) -> np.ndarray:
    """Rotation of world vectors by -gamma about the vertical axis."""
    cg = math.cos(-gamma)
    sg = math.sin(-gamma)
    return np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])


def pinhole_project(rig: CameraRig, g: GroundPoint) -> Optional[SourcePixel]:
    """Project a ground point through the matrix camera model; None if unseen.

    The camera-to-point ray is rotated into the yaw-aligned frame, its
    depression recovered with asin of the height component, and the pixel
    read off the equiangular grid. Depressions past vertical enter through
    the reflected representation, mirroring the forward model's convention.
    """
    w = np.array([g.x - rig.l, g.y - rig.d, -rig.h])
    wr = _yaw_matrix(rig.gamma) @ w
    if wr[0] == 0.0 and wr[1] == 0.0:
        return None
    s = rig.h / float(np.linalg.norm(wr))
    dep = math.asin(min(s, 1.0))

    lo = rig.theta - rig.alpha
    hi = rig.theta + rig.alpha
    for dep_k, (wy, wx) in ((dep, (wr[1], wr[0])), (math.pi - dep, (-wr[1], -wr[0]))):
        delta = math.atan2(wy, wx)
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


def render_view(rig: CameraRig, scene: GroundScene) -> Raster:
    """Render the tilted camera's view of the scene (the distorted input image).

    Pixel rays are intersected with the ground plane; rows at or above the
    horizon render as the sky constant, ground outside the scene extent as
    black.
    """
    rows = np.arange(rig.m, dtype=np.float64)[:, None]
    cols = np.arange(rig.n, dtype=np.float64)[None, :]
    a_u = (rig.theta - rig.alpha) + rows * rig.row_scale
    az = (rig.gamma - rig.alpha) + cols * rig.col_scale

    sky = a_u <= 0.0
    safe_a = np.where(sky, math.pi / 4, a_u)
    rho = np.where(np.abs(safe_a - math.pi / 2) <= 1e-12, 0.0, rig.h / np.tan(safe_a))
    xs = rig.l + rho * np.cos(az)
    ys = rig.d + rho * np.sin(az)

    tex_cols, tex_rows = scene.texture_coords(xs, ys)
    samples, ok = sample_bilinear_grid(scene.texture, tex_cols, tex_rows)

    px = np.clip(np.rint(samples), 0, 255).astype(np.uint8)
    px[~ok] = 0
    px[np.broadcast_to(sky, px.shape[:2])] = SKY_VALUE
    return Raster(rig.n, rig.m, scene.texture.channels, px)


def _paint_blob(img: np.ndarray, scene_shape, cx: float, cy: float, sigma_px: float, amp: float):
    """Add a Gaussian bump to a float image in place (local window only)."""
    h, w = scene_shape
    r = int(math.ceil(4 * sigma_px))
    x0, x1 = max(0, int(cx) - r), min(w, int(cx) + r + 1)
    y0, y1 = max(0, int(cy) - r), min(h, int(cy) + r + 1)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    bump = amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma_px**2))
    img[y0:y1, x0:x1] += bump[:, :, None]


def make_deck_scene(
    length_m: float,
    width_m: float,
    texel_per_m: float,
    n_defects: int,
    seed: int,
    margin_m: float = 3.0,
) -> GroundScene:
    """Deterministic deck texture with recorded ground-truth defects.

    The deck runs east along x over [0, length_m] and is centered on y = 0;
    the texture extends margin_m beyond it on every side as darker mottled
    shoulder so oblique footprints stay covered. The deck carries lane
    markings, a checkerboard calibration patch in one corner, mottling,
    bright delamination blobs and thin dark crack polylines; blob centers and
    crack midpoints are recorded as defects.
    """
    if length_m <= 0 or width_m <= 0 or texel_per_m <= 0:
        raise ValueError("scene dimensions must be positive")
    rng = np.random.default_rng(seed)
    full_len = length_m + 2 * margin_m
    full_wid = width_m + 2 * margin_m
    w = max(2, int(round(full_len * texel_per_m)))
    h = max(2, int(round(full_wid * texel_per_m)))
    sx = full_len / w
    sy = full_wid / h
    extent = DeckExtent(-margin_m, -width_m / 2 - margin_m, length_m + margin_m, width_m / 2 + margin_m)

    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = 120.0
    # two-octave band-limited mottling (correlation ~0.25 m and ~0.8 m) so
    # aerial views sample it cleanly, plus faint per-texel grain
    for corr_m, amp in ((0.25, 16.0), (0.8, 14.0)):
        rough = rng.normal(0.0, 1.0, size=(h, w))
        smooth = gaussian_filter(rough, sigma=max(1.0, corr_m / sx))
        std = float(smooth.std()) or 1.0
        img += (smooth * (amp / std))[:, :, None]
    img += rng.normal(0.0, 5.0, size=(h, w))[:, :, None]

    # texel-center ground coordinates
    xc = extent.x_min + (np.arange(w) + 0.5) * sx
    yc = extent.y_max - (np.arange(h) + 0.5) * sy

    # darken the off-deck shoulder without flattening its mottle (shoulder
    # features widen the registration baseline)
    on_deck_x = (xc >= 0.0) & (xc <= length_m)
    on_deck_y = (np.abs(yc) <= width_m / 2)
    shoulder = ~(on_deck_y[:, None] & on_deck_x[None, :])
    img[shoulder] -= 28.0

    # dashed lane lines with jittered dash positions; regular periods would
    # phase-lock every dash end to the same sub-pixel sampling offset and bias
    # registration coherently
    def dash_mask(period: float, length: float, phase: float) -> np.ndarray:
        mask = np.zeros(w, dtype=bool)
        x_k = extent.x_min + phase
        while x_k < extent.x_max:
            start = x_k + rng.uniform(-0.3, 0.3)
            mask |= (xc >= start) & (xc < start + length)
            x_k += period
        return mask & on_deck_x

    for off in (-0.22, 0.22):
        band = np.abs(yc - off) <= 0.06
        img[np.ix_(band, dash_mask(2.5, 1.5, 0.0))] = (205.0, 175.0, 60.0)
    for off in (width_m / 2 - 0.4, -(width_m / 2 - 0.4)):
        band = np.abs(yc - off) <= 0.06
        img[np.ix_(band, dash_mask(3.0, 1.6, 1.1))] = 230.0

    # place defect ground truth before painting surface clutter, mutually
    # separated, so the painted defects stay isolated measurable fiducials
    defect_sites: list[tuple[float, float]] = []
    margin = min(1.0, length_m / 4, width_m / 4)
    for _ in range(n_defects):
        gx = rng.uniform(margin, length_m - margin)
        gy = rng.uniform(-width_m / 2 + margin, width_m / 2 - margin)
        for _ in range(200):
            if all((gx - ox) ** 2 + (gy - oy) ** 2 >= 2.5**2 for ox, oy in defect_sites):
                break
            gx = rng.uniform(margin, length_m - margin)
            gy = rng.uniform(-width_m / 2 + margin, width_m / 2 - margin)
        defect_sites.append((gx, gy))

    def clear_of_defects(cx_m: float, cy_m: float) -> bool:
        return all((cx_m - ox) ** 2 + (cy_m - oy) ** 2 >= 1.3**2 for ox, oy in defect_sites)

    # scattered stains: high-contrast blobs that register well from the air
    n_stains = max(6, int(round(full_len * full_wid / 2.5)))
    for _ in range(n_stains):
        cx_m = rng.uniform(extent.x_min + 0.5, extent.x_max - 0.5)
        cy_m = rng.uniform(extent.y_min + 0.7, extent.y_max - 0.7)
        radius = rng.uniform(0.12, 0.35)
        amp = rng.uniform(30.0, 55.0) * (-1.0 if rng.random() < 0.6 else 1.0)
        if not clear_of_defects(cx_m, cy_m):
            continue
        _paint_blob(
            img,
            (h, w),
            (cx_m - extent.x_min) / sx - 0.5,
            (extent.y_max - cy_m) / sy - 0.5,
            sigma_px=radius / sx,
            amp=amp,
        )

    # dense paint spots with varied size and contrast: sub-pixel anchors for
    # registration, distinctive enough to survive the ratio test; kept no
    # smaller than ~0.12 m so aerial views sample them without aliasing
    n_dots = max(20, int(round(full_len * full_wid * 4.0)))
    for _ in range(n_dots):
        cx_m = rng.uniform(extent.x_min + 0.3, extent.x_max - 0.3)
        cy_m = rng.uniform(extent.y_min + 0.3, extent.y_max - 0.3)
        radius = rng.uniform(0.12, 0.22)
        amp = rng.uniform(25.0, 60.0) * (-1.0 if rng.random() < 0.5 else 1.0)
        if not clear_of_defects(cx_m, cy_m):
            continue
        _paint_blob(
            img,
            (h, w),
            (cx_m - extent.x_min) / sx - 0.5,
            (extent.y_max - cy_m) / sy - 0.5,
            sigma_px=radius / sx,
            amp=amp,
        )

    # checkerboard calibration patch in the north-west corner
    cb = 0.3
    cb_x = (0.5, min(2.9, length_m - 0.5))
    cb_y = (width_m / 2 - 2.9, width_m / 2 - 0.5)
    in_x = (xc >= cb_x[0]) & (xc < cb_x[1])
    in_y = (yc >= cb_y[0]) & (yc < cb_y[1])
    if in_x.any() and in_y.any():
        px_i = np.floor((xc[in_x] - cb_x[0]) / cb).astype(int)
        px_j = np.floor((yc[in_y] - cb_y[0]) / cb).astype(int)
        parity = (px_j[:, None] + px_i[None, :]) % 2
        block = np.where(parity == 0, 90.0, 170.0)
        sub = np.ix_(in_y, in_x)
        img[sub[0], sub[1], :] = block[:, :, None]

    defects: list[tuple[GroundPoint, str]] = []
    for i, (gx, gy) in enumerate(defect_sites):
        if i % 2 == 0:
            cx = (gx - extent.x_min) / sx - 0.5
            cy = (extent.y_max - gy) / sy - 0.5
            _paint_blob(img, (h, w), cx, cy, sigma_px=0.35 / sx, amp=65.0)
            defects.append((GroundPoint(gx, gy), "delamination"))
        else:
            # crack: short dark random-walk polyline centered on (gx, gy)
            n_seg = int(rng.integers(4, 8))
            heading = rng.uniform(0, 2 * math.pi)
            pts = [(gx, gy)]
            for _ in range(n_seg):
                heading += rng.normal(0.0, 0.5)
                step = rng.uniform(0.25, 0.5)
                px_, py_ = pts[-1]
                pts.append((px_ + step * math.cos(heading), py_ + step * math.sin(heading)))
            for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
                steps = max(2, int(math.hypot(bx - ax, by - ay) / (0.3 * sx)))
                ts = np.linspace(0.0, 1.0, steps)
                lx = ax + ts * (bx - ax)
                ly = ay + ts * (by - ay)
                ci = np.clip(((lx - extent.x_min) / sx).astype(int), 0, w - 1)
                ri = np.clip(((extent.y_max - ly) / sy).astype(int), 0, h - 1)
                img[ri, ci, :] = 30.0
            mid = pts[len(pts) // 2]
            defects.append((GroundPoint(mid[0], mid[1]), "crack"))

    texture = Raster.from_array(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    deck = DeckExtent(0.0, -width_m / 2, length_m, width_m / 2)
    return GroundScene(texture=texture, extent=extent, defects=defects, deck=deck)


def make_uniform_scene(
    length_m: float,
    width_m: float,
    texel_per_m: float,
    value: int = 128,
    margin_m: float = 3.0,
) -> GroundScene:
    """Featureless (thermal-like) deck scene with no defects."""
    w = max(2, int(round((length_m + 2 * margin_m) * texel_per_m)))
    h = max(2, int(round((width_m + 2 * margin_m) * texel_per_m)))
    texture = Raster.full(w, h, value, channels=3)
    return GroundScene(
        texture=texture,
        extent=DeckExtent(
            -margin_m, -width_m / 2 - margin_m, length_m + margin_m, width_m / 2 + margin_m
        ),
        deck=DeckExtent(0.0, -width_m / 2, length_m, width_m / 2),
    )


def footprint_span_x(rig: CameraRig) -> tuple[float, float]:
    """Along-track (x) extent of the footprint for a gamma=0 rig at l=d=0."""
    base = CameraRig(0.0, 0.0, rig.h, rig.theta, 0.0, rig.alpha, rig.m, rig.n)
    corners = ground_footprint(base)
    if corners is None:
        raise FootprintUnbounded("top image row reaches the horizon")
    xs = [c.x for c in corners]
    return min(xs), max(xs)


def make_flight(
    scene: GroundScene,
    rig: CameraRig,
    overlap: float,
    gps_noise_sigma: float,
    seed: int,
    n_views: Optional[int] = None,
) -> tuple[FlightPlan, list[tuple[Raster, ImageGeoTag]]]:
    """Fly one pass along the deck and render geotagged views.

    Waypoints are spaced so consecutive footprints overlap by the requested
    fraction along the deck axis; with n_views omitted, enough views are
    generated to cover the deck length. Geotags are the true camera
    positions about the scene anchor plus seeded Gaussian noise.
    """
    if not (0.0 <= overlap < 1.0):
        raise ValueError("overlap must lie in [0, 1)")
    x_near, x_far = footprint_span_x(rig)
    fp_len = x_far - x_near
    spacing = (1.0 - overlap) * fp_len
    cover = scene.coverage
    d0 = (cover.y_min + cover.y_max) / 2.0
    l0 = cover.x_min - x_near
    if n_views is None:
        remainder = max(0.0, cover.length - fp_len)
        n_views = 1 + int(math.ceil(remainder / spacing - 1e-9))

    rng = np.random.default_rng(seed)
    t0 = datetime(2024, 5, 1, 10, 0, 0, tzinfo=timezone.utc)
    waypoints = []
    shots = []
    for i in range(n_views):
        li = l0 + i * spacing
        view_rig = CameraRig(li, d0, rig.h, rig.theta, rig.gamma, rig.alpha, rig.m, rig.n)
        view = render_view(view_rig, scene)
        noise = rng.normal(0.0, 1.0, size=2) * gps_noise_sigma
        pos = to_geo(LocalPoint(east=li + noise[0], north=d0 + noise[1]), scene.anchor)
        tag = ImageGeoTag(
            lat=pos.lat,
            lon=pos.lon,
            alt_m=rig.h,
            heading_deg=math.degrees(rig.gamma),
            timestamp=(t0 + timedelta(seconds=2 * i)).isoformat().replace("+00:00", "Z"),
        )
        waypoints.append((li, d0))
        shots.append((view, tag))

    plan = FlightPlan(
        rig=rig,
        waypoints=waypoints,
        headings=[rig.gamma] * n_views,
        overlap=overlap,
        spacing_m=spacing,
        footprint_len_m=fp_len,
    )
    return plan, shots


def crop_closeup(scene: GroundScene, center: GroundPoint, size_m: float = 2.0) -> Raster:
    """Cut a ground-level close-up of the texture around a defect position."""
    half = size_m / 2.0
    x0 = max(scene.extent.x_min, center.x - half)
    x1 = min(scene.extent.x_max, center.x + half)
    y0 = max(scene.extent.y_min, center.y - half)
    y1 = min(scene.extent.y_max, center.y + half)
    c0 = int((x0 - scene.extent.x_min) / scene.texel_x)
    c1 = max(c0 + 1, int(math.ceil((x1 - scene.extent.x_min) / scene.texel_x)))
    r0 = int((scene.extent.y_max - y1) / scene.texel_y)
    r1 = max(r0 + 1, int(math.ceil((scene.extent.y_max - y0) / scene.texel_y)))
    c1 = min(c1, scene.texture.width)
    r1 = min(r1, scene.texture.height)
    return Raster.from_array(scene.texture.pixels[r0:r1, c0:c1, :])

"""Semi-autonomous mosaic construction.

Feature-based pairwise registration runs first (Harris corners with
normalized patch descriptors, RANSAC similarity fit); pairs without enough
inliers fall back to GPS-translation placement, which automates the manual
registration step for featureless (thermal-like) imagery. Accepted images are
composited into a geo-anchored surface map with feathered blending.

Patch descriptors are not rotation invariant; same-pass aerial frames share a
heading, which is what this registration path is for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter, maximum_filter

from .errors import DegenerateInput, EmptyInput, PreconditionViolation
from .geodesy import GeoPoint, ImageGeoTag, to_local
from .raster import Raster, luminance, sample_bilinear_grid

DESCRIPTOR_HALF = 8          # descriptor window spans [-8, +8) around the corner
NMS_SIZE = 5
HARRIS_K = 0.04
HARRIS_SIGMA = 1.5
RATIO_TEST = 0.8
RANSAC_ITERATIONS = 500
RANSAC_THRESHOLD_PX = 2.0
RANSAC_SEED = 0x5EED
DEFAULT_TAU = 12
SCALE_ACCEPT_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class Keypoint:
    """Detected corner with a 64-value normalized patch descriptor."""

    x: float
    y: float
    response: float
    descriptor: np.ndarray


@dataclass(frozen=True)
class Match:
    """Correspondence between keypoint lists a and b."""

    index_a: int
    index_b: int
    distance: float


class RegistrationMethod(str, Enum):
    FEATURE_BASED = "feature_based"
    GPS_FALLBACK = "gps_fallback"


@dataclass(frozen=True)
class Similarity2D:
    """scale * rotation + translation, in pixels."""

    scale: float
    rotation: float
    tx: float
    ty: float

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @classmethod
    def identity(cls) -> "Similarity2D":
        return cls(1.0, 0.0, 0.0, 0.0)

    def apply(self, x: float, y: float) -> tuple[float, float]:
        c = math.cos(self.rotation) * self.scale
        s = math.sin(self.rotation) * self.scale
        return c * x - s * y + self.tx, s * x + c * y + self.ty

    def apply_array(self, xs: np.ndarray, ys: np.ndarray):
        c = math.cos(self.rotation) * self.scale
        s = math.sin(self.rotation) * self.scale
        return c * xs - s * ys + self.tx, s * xs + c * ys + self.ty

    def compose(self, other: "Similarity2D") -> "Similarity2D":
        """self applied after other: (self . other)(p) = self(other(p))."""
        tx, ty = self.apply(other.tx, other.ty)
        return Similarity2D(
            scale=self.scale * other.scale,
            rotation=self.rotation + other.rotation,
            tx=tx,
            ty=ty,
        )

    def inverse(self) -> "Similarity2D":
        inv_scale = 1.0 / self.scale
        c = math.cos(-self.rotation) * inv_scale
        s = math.sin(-self.rotation) * inv_scale
        return Similarity2D(
            scale=inv_scale,
            rotation=-self.rotation,
            tx=-(c * self.tx - s * self.ty),
            ty=-(s * self.tx + c * self.ty),
        )

    def is_identity(self, tol: float = 1e-9) -> bool:
        return (
            abs(self.scale - 1.0) <= tol
            and abs(self.rotation) <= tol
            and abs(self.tx) <= tol
            and abs(self.ty) <= tol
        )


@dataclass(frozen=True)
class RegistrationResult:
    transform: Similarity2D
    inlier_count: int
    method: RegistrationMethod


@dataclass
class SurfaceMap:
    """Orthomosaic with the geo-anchor that ties it into world coordinates."""

    raster: Raster
    anchor: GeoPoint
    anchor_pixel: tuple[float, float]  # (row, col) of the anchor in the mosaic
    gsd: float
    phase: int = 1
    sensor: str = "optical"


# --- feature detection --------------------------------------------------------


def detect_features(img: Raster, max_count: int) -> list[Keypoint]:
    """Harris corners, 5x5 non-maximum suppressed, top max_count by response.

    Input must be single-channel (convert via luminance first). Keypoints
    within the descriptor window of the border or of mask-invalid pixels are
    suppressed. Positions are refined to subpixel by a parabola fit on the
    response. Each keypoint carries the 16x16 surrounding patch downsampled
    2x to 8x8, mean-subtracted and unit-normalized.
    """
    if img.channels != 1:
        raise PreconditionViolation("detect_features expects a single-channel image")
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    h, w = img.height, img.width
    if h < 2 * DESCRIPTOR_HALF + 1 or w < 2 * DESCRIPTOR_HALF + 1:
        return []

    f = img.pixels[:, :, 0].astype(np.float64)
    gy, gx = np.gradient(f)
    sxx = gaussian_filter(gx * gx, HARRIS_SIGMA)
    syy = gaussian_filter(gy * gy, HARRIS_SIGMA)
    sxy = gaussian_filter(gx * gy, HARRIS_SIGMA)
    resp = sxx * syy - sxy * sxy - HARRIS_K * (sxx + syy) ** 2

    allowed = np.zeros((h, w), dtype=bool)
    allowed[DESCRIPTOR_HALF : h - DESCRIPTOR_HALF + 1, DESCRIPTOR_HALF : w - DESCRIPTOR_HALF + 1] = True
    if img.mask is not None:
        # a 16x16 descriptor window offset [-8, +7] must not touch invalid data
        near_invalid = maximum_filter((~img.mask).astype(np.uint8), size=2 * DESCRIPTOR_HALF) > 0
        allowed &= ~near_invalid

    peak_resp = np.where(allowed, resp, -np.inf)
    max_resp = float(peak_resp.max()) if allowed.any() else 0.0
    if max_resp <= 0.0:
        return []
    threshold = 1e-6 * max_resp
    peaks = (peak_resp == maximum_filter(peak_resp, size=NMS_SIZE)) & allowed & (resp > threshold)
    ys, xs = np.nonzero(peaks)
    if ys.size == 0:
        return []

    order = np.lexsort((xs, ys, -resp[ys, xs]))[:max_count]
    kps = []
    for idx in order:
        y = int(ys[idx])
        x = int(xs[idx])
        kps.append(
            Keypoint(
                x=x + _parabola_offset(resp[y, x - 1], resp[y, x], resp[y, x + 1]),
                y=y + _parabola_offset(resp[y - 1, x], resp[y, x], resp[y + 1, x]),
                response=float(resp[y, x]),
                descriptor=_patch_descriptor(f, x, y),
            )
        )
    return kps


def _parabola_offset(left: float, center: float, right: float) -> float:
    """Subpixel vertex offset of the parabola through three response samples."""
    denom = left - 2.0 * center + right
    if abs(denom) < 1e-12:
        return 0.0
    off = 0.5 * (left - right) / denom
    return min(max(off, -0.5), 0.5)


def _patch_descriptor(f: np.ndarray, x: int, y: int) -> np.ndarray:
    patch = f[y - DESCRIPTOR_HALF : y + DESCRIPTOR_HALF, x - DESCRIPTOR_HALF : x + DESCRIPTOR_HALF]
    small = patch.reshape(8, 2, 8, 2).mean(axis=(1, 3))
    vec = small.ravel() - small.mean()
    norm = float(np.linalg.norm(vec))
    if norm < 1e-12:
        return np.zeros(64)
    out = vec / norm
    out.flags.writeable = False
    return out


# --- matching -------------------------------------------------------------


def match_features(a: Sequence[Keypoint], b: Sequence[Keypoint]) -> list[Match]:
    """Ratio-tested, cross-checked nearest-descriptor matching from a into b."""
    if not a or not b:
        return []
    da = np.stack([k.descriptor for k in a])
    db = np.stack([k.descriptor for k in b])
    d2 = np.maximum(
        (da * da).sum(axis=1)[:, None] + (db * db).sum(axis=1)[None, :] - 2.0 * da @ db.T,
        0.0,
    )
    nearest_in_b = np.argmin(d2, axis=1)
    nearest_in_a = np.argmin(d2, axis=0)

    matches = []
    for i, j in enumerate(nearest_in_b):
        if nearest_in_a[j] != i:
            continue
        d1 = float(np.linalg.norm(da[i] - db[j]))  # exact, unlike the expansion
        if len(b) > 1:
            row = d2[i].copy()
            row[j] = np.inf
            d2nd = math.sqrt(float(row.min()))
            if not d1 < RATIO_TEST * d2nd:
                continue
        matches.append(Match(index_a=i, index_b=int(j), distance=d1))
    return matches


# --- transform estimation ---------------------------------------------------


def estimate_transform(
    src: np.ndarray,
    dst: np.ndarray,
    *,
    iterations: int = RANSAC_ITERATIONS,
    threshold: float = RANSAC_THRESHOLD_PX,
    seed: int = RANSAC_SEED,
) -> tuple[Similarity2D, int]:
    """RANSAC a similarity mapping src points onto dst points.

    Minimal samples are 2-point solves; the final transform is a least-squares
    refit on the largest inlier set, whose size is returned. Deterministic for
    a given seed. Raises DegenerateInput for fewer than 2 correspondences or
    when every sampled pair is coincident.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    n = len(src)
    if n < 2 or len(dst) != n:
        raise DegenerateInput(f"need >= 2 correspondences, got {n}")
    p = src[:, 0] + 1j * src[:, 1]
    q = dst[:, 0] + 1j * dst[:, 1]

    rng = np.random.default_rng(seed)
    best_count = 0
    best_inliers = None
    for _ in range(iterations):
        i, j = rng.integers(0, n, size=2)
        if i == j or p[i] == p[j]:
            continue
        w = (q[j] - q[i]) / (p[j] - p[i])
        if w == 0:
            continue
        t = q[i] - w * p[i]
        inliers = np.abs(w * p + t - q) <= threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None:
        raise DegenerateInput("no non-coincident point pair sampled")

    # refit on the consensus set, then iterate to the stable (largest) inlier
    # set of the refit transform; a minimal-sample consensus alone is noisy
    inliers = best_inliers
    transform = None
    for _ in range(20):
        w, t = _lsq_similarity(p[inliers], q[inliers])
        transform = Similarity2D(
            scale=abs(w), rotation=math.atan2(w.imag, w.real), tx=t.real, ty=t.imag
        )
        new_inliers = np.abs(w * p + t - q) <= threshold
        if not new_inliers.any():
            break
        if np.array_equal(new_inliers, inliers):
            inliers = new_inliers
            break
        inliers = new_inliers
    return transform, int(inliers.sum())


def _lsq_similarity(pi: np.ndarray, qi: np.ndarray) -> tuple[complex, complex]:
    """Least-squares similarity (complex form) onto paired complex points."""
    pm = pi.mean()
    qm = qi.mean()
    denom = float(np.sum(np.abs(pi - pm) ** 2))
    if denom == 0.0:
        raise DegenerateInput("inlier source points are coincident")
    w = complex(np.sum(np.conj(pi - pm) * (qi - qm))) / denom
    if w == 0:
        raise DegenerateInput("inlier target points are coincident")
    t = qm - w * pm
    return w, t


# --- pairwise registration ----------------------------------------------------


def gps_offset(
    tag_a: ImageGeoTag, tag_b: ImageGeoTag, anchor: GeoPoint, gsd: float
) -> tuple[float, float]:
    """Pixel offset of image b's frame relative to image a's, from geotags alone.

    dx is east in columns; dy is negative north in rows (rows increase
    southward).
    """
    if gsd <= 0:
        raise ValueError("gsd must be positive")
    la = to_local(tag_a.point(), anchor)
    lb = to_local(tag_b.point(), anchor)
    return (lb.east - la.east) / gsd, -(lb.north - la.north) / gsd


def register_pair(
    base: Raster,
    next_img: Raster,
    tag_base: ImageGeoTag,
    tag_next: ImageGeoTag,
    gsd: float,
    anchor: GeoPoint,
    tau: int = DEFAULT_TAU,
    max_features: int = 500,
) -> RegistrationResult:
    """Align next_img into base's pixel frame; never fails.

    Both images must already be perspective-corrected to a common gsd. The
    feature path wins when RANSAC finds at least tau inliers (and a sane
    same-altitude scale); otherwise the transform is the pure GPS translation.
    """
    kps_next = detect_features(luminance(next_img), max_features)
    kps_base = detect_features(luminance(base), max_features)
    matches = match_features(kps_next, kps_base)
    if len(matches) >= 2:
        src = np.array([(kps_next[m.index_a].x, kps_next[m.index_a].y) for m in matches])
        dst = np.array([(kps_base[m.index_b].x, kps_base[m.index_b].y) for m in matches])
        try:
            transform, inliers = estimate_transform(src, dst)
        except DegenerateInput:
            transform, inliers = None, 0
        if (
            transform is not None
            and inliers >= tau
            and SCALE_ACCEPT_RANGE[0] <= transform.scale <= SCALE_ACCEPT_RANGE[1]
        ):
            return RegistrationResult(transform, inliers, RegistrationMethod.FEATURE_BASED)

    dx, dy = gps_offset(tag_base, tag_next, anchor, gsd)
    return RegistrationResult(
        Similarity2D(1.0, 0.0, dx, dy), 0, RegistrationMethod.GPS_FALLBACK
    )


# --- compositing ----------------------------------------------------------


def composite(
    images: Sequence[tuple[Raster, Similarity2D]],
    anchor: GeoPoint,
    gsd: float,
    anchor_pixel_in_first: tuple[float, float] = (0.0, 0.0),
) -> SurfaceMap:
    """Blend registered images into one mosaic.

    The first image's transform must be the identity (it defines the frame);
    all transforms map into its pixel coordinates. The output extent is the
    bounding box of all transformed image corners. Overlaps blend by feather
    weight: the sample position's distance to the contributing image's
    nearest edge (the pixel-grid boundary rectangle), in pixels, so every
    valid sample keeps a positive weight. Pixels with no contributor are
    mask-invalid. The anchor GeoPoint corresponds to anchor_pixel_in_first
    (row, col) of the first image and is recorded with its mosaic position.
    """
    if not images:
        raise EmptyInput("composite needs at least one image")
    if not images[0][1].is_identity():
        raise PreconditionViolation("first image's transform must be the identity")
    channels = images[0][0].channels
    if any(img.channels != channels for img, _ in images):
        raise ValueError("all images must share a channel count")

    corners_x: list[float] = []
    corners_y: list[float] = []
    for img, t in images:
        for cx, cy in ((0, 0), (img.width - 1, 0), (0, img.height - 1), (img.width - 1, img.height - 1)):
            tx, ty = t.apply(float(cx), float(cy))
            corners_x.append(tx)
            corners_y.append(ty)
    x_min = math.floor(min(corners_x))
    y_min = math.floor(min(corners_y))
    cols = math.ceil(max(corners_x)) - x_min + 1
    rows = math.ceil(max(corners_y)) - y_min + 1

    gx = x_min + np.arange(cols, dtype=np.float64)[None, :]
    gy = y_min + np.arange(rows, dtype=np.float64)[:, None]
    gx, gy = np.broadcast_arrays(gx, gy)

    num = np.zeros((rows, cols, channels), dtype=np.float64)
    den = np.zeros((rows, cols), dtype=np.float64)
    for img, t in images:
        inv = t.inverse()
        sx, sy = inv.apply_array(gx, gy)
        samples, ok = sample_bilinear_grid(img, sx, sy)
        weight = np.minimum.reduce(
            [sx + 0.5, img.width - 0.5 - sx, sy + 0.5, img.height - 0.5 - sy]
        )
        weight = np.where(ok, weight, 0.0)
        num += samples * weight[:, :, None]
        den += weight

    valid = den > 0.0
    px = np.zeros((rows, cols, channels), dtype=np.uint8)
    safe = np.where(valid, den, 1.0)
    blended = np.clip(np.rint(num / safe[:, :, None]), 0, 255).astype(np.uint8)
    px[valid] = blended[valid]

    row0, col0 = anchor_pixel_in_first
    return SurfaceMap(
        raster=Raster(cols, rows, channels, px, valid),
        anchor=anchor,
        anchor_pixel=(row0 - y_min, col0 - x_min),
        gsd=gsd,
    )

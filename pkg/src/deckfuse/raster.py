"""In-memory raster type with bit-exact PNM IO, BMP encoding and subpixel sampling.

Binary netpbm (P5 grayscale / P6 color, maxval 255) is the canonical on-disk
format; validity masks travel as sibling P5 files; BMP is produced only for
browser display. Rasters are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MalformedHeader, TruncatedPayload, UnsupportedMaxval

# Color used for mask-invalid pixels in browser-facing BMPs.
INVALID_BGR = (255, 0, 255)

_HEADER_RE = re.compile(
    rb"^(P[56])[ \t\r\n]+(?:#[^\n]*\n[ \t\r\n]*)*"
    rb"(\d+)[ \t\r\n]+(?:#[^\n]*\n[ \t\r\n]*)*"
    rb"(\d+)[ \t\r\n]+(?:#[^\n]*\n[ \t\r\n]*)*"
    rb"(\d+)[ \t\r\n]"
)


@dataclass(eq=False)
class Raster:
    """8-bit image grid with an optional per-pixel validity mask.

    pixels has shape (height, width, channels) with channels 1 or 3; mask,
    when present, has shape (height, width) where True marks a valid pixel.
    Invalid pixels must not contribute to any downstream computation.
    """

    width: int
    height: int
    channels: int
    pixels: np.ndarray
    mask: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.width < 0 or self.height < 0:
            raise ValueError("width and height must be non-negative")
        px = np.asarray(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width, self.channels
        )
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool).reshape(self.height, self.width)
            m.flags.writeable = False
            object.__setattr__(self, "mask", m)

    @classmethod
    def from_array(cls, arr: np.ndarray, mask: Optional[np.ndarray] = None) -> "Raster":
        """Build a raster from an (h, w) or (h, w, c) uint8-compatible array."""
        a = np.asarray(arr)
        if a.ndim == 2:
            a = a[:, :, None]
        h, w, c = a.shape
        return cls(width=w, height=h, channels=c, pixels=a.astype(np.uint8), mask=mask)

    @classmethod
    def full(cls, width: int, height: int, value, channels: int = 1) -> "Raster":
        """Uniform raster of the given value."""
        px = np.full((height, width, channels), value, dtype=np.uint8)
        return cls(width=width, height=height, channels=channels, pixels=px)

    def valid_mask(self) -> np.ndarray:
        """Validity as a boolean (h, w) array; absent mask means all valid."""
        if self.mask is None:
            return np.ones((self.height, self.width), dtype=bool)
        return self.mask

    def with_mask(self, mask: Optional[np.ndarray]) -> "Raster":
        """Same pixels with a different (or no) validity mask."""
        return Raster(self.width, self.height, self.channels, self.pixels, mask)

    def same_content(self, other: "Raster") -> bool:
        """Pixel-for-pixel (and mask) equality."""
        return (
            self.width == other.width
            and self.height == other.height
            and self.channels == other.channels
            and np.array_equal(self.pixels, other.pixels)
            and np.array_equal(self.valid_mask(), other.valid_mask())
        )


def load_pnm(data: bytes) -> Raster:
    """Parse a binary PNM (P5/P6, maxval 255) byte string into a Raster.

    Raises MalformedHeader for anything that is not a binary P5/P6 header,
    UnsupportedMaxval for maxval != 255 and TruncatedPayload when fewer
    sample bytes follow than width*height*channels. Trailing surplus bytes
    are ignored. The result carries no mask.
    """
    m = _HEADER_RE.match(data)
    if m is None:
        raise MalformedHeader("not a binary P5/P6 header")
    magic, w_b, h_b, maxval_b = m.groups()
    width, height, maxval = int(w_b), int(h_b), int(maxval_b)
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval must be 255, got {maxval}")
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    payload = data[m.end():]
    if len(payload) < need:
        raise TruncatedPayload(f"expected {need} sample bytes, got {len(payload)}")
    px = np.frombuffer(payload[:need], dtype=np.uint8)
    return Raster(width=width, height=height, channels=channels, pixels=px)


def save_pnm(r: Raster) -> bytes:
    """Serialize pixels to the canonical binary PNM form.

    Header is exactly "P5\\n<w> <h>\\n255\\n" (or P6) followed by raw samples;
    the validity mask is not encoded (see save_mask).
    """
    magic = b"P5" if r.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (r.width, r.height)
    return header + r.pixels.tobytes()


def save_mask(r: Raster) -> bytes:
    """Serialize the validity mask as a P5 image (255 valid, 0 invalid).

    A raster without a mask serializes as all-255.
    """
    m = np.where(r.valid_mask(), np.uint8(255), np.uint8(0))
    header = b"P5\n%d %d\n255\n" % (r.width, r.height)
    return header + m.tobytes()


def mask_from_raster(m: Raster) -> np.ndarray:
    """Interpret a loaded P5 mask image: nonzero means valid."""
    if m.channels != 1:
        raise ValueError("mask images must be single-channel")
    return m.pixels[:, :, 0] != 0


def encode_bmp(r: Raster) -> bytes:
    """Encode as an uncompressed 24-bit BMP (BITMAPINFOHEADER, bottom-up rows).

    Rows are zero-padded to 4-byte multiples; grayscale input replicates its
    channel into B, G, R; mask-invalid pixels render as magenta.
    """
    row_size = (3 * r.width + 3) // 4 * 4
    image_size = row_size * r.height
    file_size = 14 + 40 + image_size

    header = struct.pack("<2sIHHI", b"BM", file_size, 0, 0, 54)
    info = struct.pack(
        "<IiiHHIIiiII", 40, r.width, r.height, 1, 24, 0, image_size, 2835, 2835, 0, 0
    )

    if r.channels == 1:
        rgb = np.repeat(r.pixels, 3, axis=2)
    else:
        rgb = r.pixels
    bgr = rgb[:, :, ::-1].astype(np.uint8)
    if r.mask is not None:
        bgr = bgr.copy()
        bgr[~r.mask] = INVALID_BGR

    rows = np.zeros((r.height, row_size), dtype=np.uint8)
    if r.width:
        rows[:, : 3 * r.width] = bgr.reshape(r.height, 3 * r.width)
    return header + info + rows[::-1].tobytes()


def sample_bilinear(r: Raster, x: float, y: float):
    """Bilinear sample at subpixel (x=col, y=row); None when there is no data.

    No-data means (x, y) outside [0, w-1] x [0, h-1] or any surrounding pixel
    with nonzero interpolation weight flagged invalid. Returns a tuple of
    per-channel floats otherwise.
    """
    if not (0.0 <= x <= r.width - 1 and 0.0 <= y <= r.height - 1):
        return None
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    fx = x - x0
    fy = y - y0
    x1 = x0 + 1
    y1 = y0 + 1

    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy

    valid = r.valid_mask()
    acc = np.zeros(r.channels, dtype=np.float64)
    for (cx, cy, wgt) in ((x0, y0, w00), (x1, y0, w10), (x0, y1, w01), (x1, y1, w11)):
        if wgt == 0.0:
            continue
        if not (0 <= cx < r.width and 0 <= cy < r.height) or not valid[cy, cx]:
            return None
        acc += wgt * r.pixels[cy, cx, :].astype(np.float64)
    return tuple(float(v) for v in acc)


def sample_bilinear_grid(r: Raster, xs: np.ndarray, ys: np.ndarray):
    """Vectorized bilinear sampling at arrays of (x=col, y=row) positions.

    Returns (values, ok) where values has shape xs.shape + (channels,) and ok
    marks positions with data, under the same no-data rules as
    sample_bilinear. Values at no-data positions are zero.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if r.width == 0 or r.height == 0:
        return (
            np.zeros(xs.shape + (r.channels,), dtype=np.float64),
            np.zeros(xs.shape, dtype=bool),
        )
    in_bounds = (xs >= 0.0) & (xs <= r.width - 1) & (ys >= 0.0) & (ys <= r.height - 1)

    x0 = np.floor(np.where(in_bounds, xs, 0.0)).astype(np.int64)
    y0 = np.floor(np.where(in_bounds, ys, 0.0)).astype(np.int64)
    fx = np.where(in_bounds, xs, 0.0) - x0
    fy = np.where(in_bounds, ys, 0.0) - y0

    weights = (
        (1.0 - fx) * (1.0 - fy),
        fx * (1.0 - fy),
        (1.0 - fx) * fy,
        fx * fy,
    )
    offsets = ((0, 0), (1, 0), (0, 1), (1, 1))

    valid = r.valid_mask()
    ok = in_bounds.copy()
    acc = np.zeros(xs.shape + (r.channels,), dtype=np.float64)
    for (dx, dy), wgt in zip(offsets, weights):
        cx = x0 + dx
        cy = y0 + dy
        needed = wgt > 0.0
        inside = (cx >= 0) & (cx < r.width) & (cy >= 0) & (cy < r.height)
        cxc = np.clip(cx, 0, max(r.width - 1, 0))
        cyc = np.clip(cy, 0, max(r.height - 1, 0))
        contrib_ok = inside & valid[cyc, cxc]
        ok &= ~needed | contrib_ok
        take = needed & contrib_ok
        acc += np.where(take[..., None], wgt[..., None] * r.pixels[cyc, cxc, :], 0.0)
    acc[~ok] = 0.0
    return acc, ok


def luminance(r: Raster) -> Raster:
    """Collapse to a single channel (BT.601 weights), preserving the mask."""
    if r.channels == 1:
        return r
    f = r.pixels.astype(np.float64)
    lum = 0.299 * f[:, :, 0] + 0.587 * f[:, :, 1] + 0.114 * f[:, :, 2]
    px = np.clip(np.rint(lum), 0, 255).astype(np.uint8)
    return Raster(r.width, r.height, 1, px[:, :, None], r.mask)


def to_rgb(r: Raster) -> Raster:
    """Replicate grayscale into three channels; 3-channel input is returned as is."""
    if r.channels == 3:
        return r
    return Raster(r.width, r.height, 3, np.repeat(r.pixels, 3, axis=2), r.mask)

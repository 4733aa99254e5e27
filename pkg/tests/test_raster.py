import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deckfuse.errors import MalformedHeader, TruncatedPayload, UnsupportedMaxval
from deckfuse.raster import (
    Raster,
    encode_bmp,
    load_pnm,
    luminance,
    mask_from_raster,
    sample_bilinear,
    sample_bilinear_grid,
    save_mask,
    save_pnm,
)


def test_load_p6_single_white_pixel():
    r = load_pnm(b"P6\n1 1\n255\n\xff\xff\xff")
    assert (r.width, r.height, r.channels) == (1, 1, 3)
    assert r.pixels.tolist() == [[[255, 255, 255]]]
    assert r.mask is None


def test_load_p5():
    r = load_pnm(b"P5\n2 2\n255\n\x01\x02\x03\x04")
    assert (r.width, r.height, r.channels) == (2, 2, 1)
    assert r.pixels[:, :, 0].tolist() == [[1, 2], [3, 4]]


def test_load_accepts_comments_and_whitespace():
    r = load_pnm(b"P5 # a comment\n# another\n 2\t1 \n255\n\x08\x09")
    assert (r.width, r.height) == (2, 1)


def test_ascii_variant_rejected():
    with pytest.raises(MalformedHeader):
        load_pnm(b"P3\n1 1\n255\n255 255 255")


def test_bad_magic_and_garbage():
    for payload in (b"", b"hello", b"P7\n1 1\n255\n\x00", b"P5\nx 1\n255\n\x00"):
        with pytest.raises(MalformedHeader):
            load_pnm(payload)


def test_truncated_payload():
    with pytest.raises(TruncatedPayload):
        load_pnm(b"P6\n2 2\n255\n\x00\x00\x00")


def test_unsupported_maxval():
    with pytest.raises(UnsupportedMaxval):
        load_pnm(b"P5\n1 1\n65535\n\x00\x00")


def test_save_p5_single_gray():
    r = Raster.full(1, 1, 128, channels=1)
    assert save_pnm(r) == b"P5\n1 1\n255\n\x80"


def test_save_p6_payload_size():
    r = Raster.full(2, 2, 7, channels=3)
    data = save_pnm(r)
    header = b"P6\n2 2\n255\n"
    assert data.startswith(header)
    assert len(data) - len(header) == 12


@settings(max_examples=60, deadline=None)
@given(
    w=st.integers(0, 8),
    h=st.integers(0, 8),
    channels=st.sampled_from([1, 3]),
    data=st.data(),
)
def test_round_trip_identity(w, h, channels, data):
    payload = data.draw(
        st.binary(min_size=w * h * channels, max_size=w * h * channels)
    )
    r = Raster(w, h, channels, np.frombuffer(payload, dtype=np.uint8))
    encoded = save_pnm(r)
    back = load_pnm(encoded)
    assert back.same_content(r)
    assert save_pnm(back) == encoded


def test_round_trip_of_canonical_bytes():
    blob = b"P6\n2 1\n255\n" + bytes(range(6))
    assert save_pnm(load_pnm(blob)) == blob


# --- masks ---------------------------------------------------------------


def test_save_mask_absent_is_all_valid():
    data = save_mask(Raster.full(2, 2, 0, channels=1))
    assert data == b"P5\n2 2\n255\n" + b"\xff" * 4


def test_save_mask_marks_invalid():
    mask = np.ones((2, 2), dtype=bool)
    mask[0, 0] = False
    r = Raster.full(2, 2, 9, channels=1).with_mask(mask)
    payload = save_mask(r)[len(b"P5\n2 2\n255\n"):]
    assert payload == b"\x00\xff\xff\xff"


def test_mask_round_trip():
    mask = np.array([[True, False], [False, True]])
    r = Raster.full(2, 2, 50, channels=3).with_mask(mask)
    reloaded = load_pnm(save_pnm(r)).with_mask(mask_from_raster(load_pnm(save_mask(r))))
    assert reloaded.same_content(r)


# --- BMP -------------------------------------------------------------------


def test_bmp_1x1_is_58_bytes():
    data = encode_bmp(Raster.full(1, 1, 0, channels=3))
    assert len(data) == 58
    assert data[:2] == b"BM"


def test_bmp_2x2_is_70_bytes():
    assert len(encode_bmp(Raster.full(2, 2, 0, channels=3))) == 70


@pytest.mark.parametrize("w,h", [(1, 1), (2, 2), (3, 5), (7, 1), (640, 3)])
def test_bmp_length_formula(w, h):
    data = encode_bmp(Raster.full(w, h, 10, channels=1))
    assert len(data) == 54 + h * ((3 * w + 3) // 4 * 4)


def test_bmp_grayscale_replicates_channels():
    r = Raster.from_array(np.array([[[77]]], dtype=np.uint8))
    data = encode_bmp(r)
    assert data[54:57] == bytes([77, 77, 77])


def test_bmp_rows_bottom_up_and_bgr():
    px = np.zeros((2, 1, 3), dtype=np.uint8)
    px[0, 0] = (255, 0, 0)  # top row red
    px[1, 0] = (0, 0, 255)  # bottom row blue
    data = encode_bmp(Raster.from_array(px))
    # bottom row first, as BGR
    assert data[54:57] == bytes([255, 0, 0])  # blue pixel -> B=255
    assert data[58:61] == bytes([0, 0, 255])  # red pixel -> R=255


def test_bmp_invalid_pixels_are_magenta():
    mask = np.array([[False]])
    data = encode_bmp(Raster.full(1, 1, 10, channels=3).with_mask(mask))
    assert data[54:57] == bytes([255, 0, 255])


# --- bilinear sampling ----------------------------------------------------


def _gradient_raster():
    px = np.array([[0, 100], [50, 150]], dtype=np.uint8)
    return Raster.from_array(px)


def test_sample_integer_coordinates_exact():
    r = _gradient_raster()
    assert sample_bilinear(r, 1.0, 0.0) == (100.0,)
    assert sample_bilinear(r, 0.0, 1.0) == (50.0,)


def test_sample_midpoint():
    r = _gradient_raster()
    assert sample_bilinear(r, 0.5, 0.0) == (50.0,)


def test_sample_out_of_bounds_is_none():
    r = _gradient_raster()
    assert sample_bilinear(r, -0.01, 0.0) is None
    assert sample_bilinear(r, 0.0, 1.01) is None


def test_sample_invalid_neighbor_is_none_only_with_weight():
    mask = np.array([[True, False], [True, True]])
    r = _gradient_raster().with_mask(mask)
    assert sample_bilinear(r, 0.5, 0.0) is None  # pulls on the invalid pixel
    assert sample_bilinear(r, 0.0, 0.5) == (25.0,)  # zero weight on it
    assert sample_bilinear(r, 1.0, 1.0) == (150.0,)


@settings(max_examples=80, deadline=None)
@given(
    x=st.floats(0.0, 1.0),
    y=st.floats(0.0, 1.0),
    eps=st.floats(1e-6, 0.5),
)
def test_sample_continuity(x, y, eps):
    r = _gradient_raster()
    a = sample_bilinear(r, x, y)
    b = sample_bilinear(r, min(x + eps, 1.0), y)
    assert abs(a[0] - b[0]) <= 255 * eps + 1e-9


def test_grid_sampler_matches_scalar():
    rng = np.random.default_rng(3)
    px = rng.integers(0, 256, size=(9, 11, 3), dtype=np.uint8)
    mask = rng.random((9, 11)) > 0.2
    r = Raster.from_array(px, mask)
    xs = rng.uniform(-1, 11, size=40)
    ys = rng.uniform(-1, 9, size=40)
    vals, ok = sample_bilinear_grid(r, xs, ys)
    for k in range(40):
        scalar = sample_bilinear(r, float(xs[k]), float(ys[k]))
        if scalar is None:
            assert not ok[k]
        else:
            assert ok[k]
            assert np.allclose(vals[k], scalar)


def test_luminance_weights():
    px = np.array([[[255, 0, 0]]], dtype=np.uint8)
    assert luminance(Raster.from_array(px)).pixels[0, 0, 0] == 76  # round(0.299*255)


def test_determinism():
    rng = np.random.default_rng(11)
    px = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
    r = Raster.from_array(px)
    assert save_pnm(r) == save_pnm(Raster.from_array(px.copy()))
    assert encode_bmp(r) == encode_bmp(Raster.from_array(px.copy()))

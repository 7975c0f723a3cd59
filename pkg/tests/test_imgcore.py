import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image as PILImage
from scipy.ndimage import gaussian_filter

import oracles
from lrface.errors import ValidationError
from lrface.imgcore import (PSNR_INF, Image, bicubic_resize, load_image, psnr, resize_planes,
                            save_image, scale_down, scale_up, to_gray)


def test_load_gray_png_scales_to_unit(tmp_path):
    path = tmp_path / "g.png"
    PILImage.fromarray(np.array([[0, 85], [170, 255]], dtype=np.uint8), mode="L").save(path)
    img = load_image(path)
    assert img.channels == 1 and img.colorspace == "Gray"
    np.testing.assert_allclose(img.data.ravel(), [0.0, 1 / 3, 2 / 3, 1.0], atol=1e-12)


def test_load_rgb_jpeg_dimensions(tmp_path):
    path = tmp_path / "face.jpg"
    arr = np.random.default_rng(0).integers(0, 255, (250, 250, 3), dtype=np.uint8)
    PILImage.fromarray(arr, mode="RGB").save(path, quality=90)
    img = load_image(path)
    assert (img.width, img.height, img.channels) == (250, 250, 3)


def test_truncated_file_is_decode_error(tmp_path):
    path = tmp_path / "t.png"
    PILImage.fromarray(np.zeros((32, 32), dtype=np.uint8)).save(path)
    path.write_bytes(path.read_bytes()[:40])
    with pytest.raises(ValidationError):
        load_image(path)


def test_unsupported_format(tmp_path):
    path = tmp_path / "x.bmp"
    PILImage.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(path)
    with pytest.raises(ValidationError, match="unsupported"):
        load_image(path)


def test_missing_file():
    with pytest.raises(ValidationError):
        load_image("/nonexistent/file.png")


def test_zero_dimension_rejected():
    with pytest.raises(ValidationError):
        Image(np.zeros((1, 0, 4)))


def test_save_roundtrip_rounds_to_8bit(tmp_path):
    data = np.array([[[0.0, 0.5, 1.2], [-0.1, 0.25, 1 / 255]]])
    save_image(Image(data), tmp_path / "r.png")
    back = load_image(tmp_path / "r.png")
    expected = np.rint(np.clip(data, 0, 1) * 255) / 255
    np.testing.assert_array_equal(back.data, expected)


def test_to_gray_white_and_red():
    white = Image(np.ones((3, 2, 2)))
    np.testing.assert_allclose(to_gray(white).data, 1.0, atol=1e-15)
    red = Image(np.stack([np.ones((1, 1)), np.zeros((1, 1)), np.zeros((1, 1))]))
    assert to_gray(red).data[0, 0, 0] == pytest.approx(0.299)


def test_to_gray_matches_scalar(rng):
    img = Image(rng.random((3, 4, 4)))
    g = to_gray(img)
    for y in range(4):
        for x in range(4):
            r, gg, b = img.data[:, y, x]
            assert g.data[0, y, x] == pytest.approx(0.299 * r + 0.587 * gg + 0.114 * b, abs=1e-15)


def test_to_gray_passthrough():
    img = Image(np.full((1, 3, 3), 0.4))
    assert to_gray(img) is img


@pytest.mark.parametrize("size", [(1, 1), (7, 3), (30, 30), (200, 91)])
def test_constant_preserved_exactly(size):
    img = Image(np.full((3, 45, 37), 0.3137))
    out = bicubic_resize(img, *size)
    assert np.all(out.data == 0.3137)


def test_upscale_ramp_matches_scalar_reference():
    ramp = np.add.outer(np.arange(6) * 0.1, np.arange(6) * 0.05)
    out = bicubic_resize(Image(ramp[None] / ramp.max()), 12, 12)
    ref = np.clip(np.array(oracles.resize_plane((ramp / ramp.max()).tolist(), 12, 12)), 0, 1)
    assert np.max(np.abs(out.data[0] - ref)) <= 1e-6


@pytest.mark.parametrize("antialias", [True, False])
def test_downscale_matches_scalar_reference(rng, antialias):
    plane = rng.random((13, 17))
    out = resize_planes(plane[None], 5, 4, antialias=antialias)[0]
    ref = np.array(oracles.resize_plane(plane.tolist(), 5, 4, antialias))
    assert np.max(np.abs(out - ref)) <= 1e-12


def test_plain_kernel_downscale_by_3_is_decimation(rng):
    plane = rng.random((9, 9))
    out = resize_planes(plane[None], 3, 3, antialias=False)[0]
    np.testing.assert_allclose(out, plane[1::3, 1::3], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_resize_is_linear(w, h, alpha, beta, seed):
    r = np.random.default_rng(seed)
    a, b = r.random((2, 11, 14))
    lhs = resize_planes((alpha * a + beta * b)[None], w, h)
    rhs = alpha * resize_planes(a[None], w, h) + beta * resize_planes(b[None], w, h)
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.integers(1, 50), st.integers(1, 50))
def test_resize_preserves_constants_unclamped(c, w, h):
    out = resize_planes(np.full((1, 9, 12), c), w, h)
    assert np.max(np.abs(out - c)) <= 1e-9


def test_roundtrip_on_band_limited_images(rng):
    errs = []
    for sigma in (2.0, 3.0, 4.0):
        noise = gaussian_filter(rng.random((90, 90)), sigma, mode="reflect")
        noise = (noise - noise.min()) / (noise.max() - noise.min())
        img = Image(noise[None])
        back = scale_up(scale_down(img, 3), 3)
        errs.append(np.mean(np.abs(back.data - img.data)))
    assert max(errs) <= 0.05


def test_scale_down_floor_rule():
    img = Image(np.zeros((3, 250, 250)))
    small = scale_down(img, 3)
    assert small.size == (83, 83)
    assert scale_up(small, 3).size == (249, 249)


def test_zero_target_rejected():
    with pytest.raises(ValidationError):
        bicubic_resize(Image(np.zeros((1, 4, 4))), 0, 3)


def test_resize_output_clamped(rng):
    step = np.zeros((1, 8, 8))
    step[:, :, 4:] = 1.0
    out = bicubic_resize(Image(step), 24, 24)
    assert out.data.min() >= 0.0 and out.data.max() <= 1.0


def test_psnr_identical_is_sentinel(rng):
    a = Image(rng.random((3, 5, 5)))
    assert psnr(a, a) == PSNR_INF and math.isinf(PSNR_INF)


def test_psnr_uniform_offset_is_20db():
    a = Image(np.full((1, 4, 4), 0.5))
    b = Image(np.full((1, 4, 4), 0.6))
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)


def test_psnr_matches_scalar_and_is_symmetric(rng):
    a, b = Image(rng.random((3, 6, 7))), Image(rng.random((3, 6, 7)))
    diffs = (a.data - b.data).ravel()
    mse = sum(d * d for d in diffs) / len(diffs)
    assert psnr(a, b) == pytest.approx(10 * math.log10(1 / mse), rel=1e-12)
    assert psnr(a, b) == psnr(b, a)


def test_psnr_shape_mismatch():
    with pytest.raises(ValidationError):
        psnr(Image(np.zeros((1, 3, 3))), Image(np.zeros((1, 3, 4))))


def test_image_is_immutable(rng):
    img = Image(rng.random((1, 3, 3)))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0

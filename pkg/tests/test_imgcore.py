import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image as PILImage

from eigensr.errors import FormatError
from eigensr.imgcore import (BICUBIC, BILINEAR, Image, PatchLayout, ResampleKernel, collocated_layout,
                             compute_layout, extract_patches, load_image, resample, save_image,
                             stitch_patches, target_size)


# ---------------------------------------------------------------- Image / IO

def test_image_clamps_and_is_readonly():
    img = Image(np.array([[-0.5, 0.5], [1.5, 1.0]]))
    assert img.width == 2 and img.height == 2
    np.testing.assert_array_equal(img.data, [0.0, 0.5, 1.0, 1.0])
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 0.3


def test_image_rejects_nonfinite():
    with pytest.raises(ValueError):
        Image(np.array([[np.nan, 0.0]]))


def test_load_pgm_bytes(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    img = load_image(path)
    assert (img.width, img.height) == (2, 2)
    np.testing.assert_array_equal(img.data, [0.0, 1.0, 128 / 255, 64 / 255])


def test_load_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_image(tmp_path / "nope.pgm")


def test_load_16bit_png_is_format_error(tmp_path):
    path = tmp_path / "deep.png"
    PILImage.fromarray(np.full((4, 4), 40000, dtype=np.uint16)).save(path)
    with pytest.raises(FormatError, match="PNG"):
        load_image(path)


def test_load_rgb_png_converts_to_luminance(tmp_path):
    path = tmp_path / "rgb.png"
    rgb = np.zeros((3, 3, 3), dtype=np.uint8)
    rgb[..., 1] = 200
    PILImage.fromarray(rgb, mode="RGB").save(path)
    img = load_image(path)
    expected = PILImage.fromarray(rgb, mode="RGB").convert("L")
    np.testing.assert_array_equal(img.pixels, np.asarray(expected) / 255.0)


def test_garbage_file_is_format_error(tmp_path):
    path = tmp_path / "junk.pgm"
    path.write_bytes(b"not an image at all")
    with pytest.raises(FormatError):
        load_image(path)


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_save_load_roundtrip_8bit(tmp_path, rng, suffix):
    arr = rng.integers(0, 256, (5, 7)) / 255.0
    path = tmp_path / f"x{suffix}"
    save_image(Image(arr), path)
    assert load_image(path) == Image(arr)


def test_saved_pgm_header(tmp_path):
    path = tmp_path / "h.pgm"
    save_image(Image(np.zeros((2, 3))), path)
    assert path.read_bytes().startswith(b"P5\n3 2\n255\n")


# ---------------------------------------------------------------- resampling

def _cubic_direct(t, a=-0.5):
    t = abs(t)
    if t <= 1:
        return (a + 2) * t ** 3 - (a + 3) * t ** 2 + 1
    if t < 2:
        return a * t ** 3 - 5 * a * t ** 2 + 8 * a * t - 4 * a
    return 0.0


def _upscale_oracle(src, out_h, out_w):
    """Direct double loop over output pixels evaluating the cubic kernel per tap."""
    h, w = src.shape
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        u = (i + 0.5) * h / out_h - 0.5
        for j in range(out_w):
            v = (j + 0.5) * w / out_w - 0.5
            acc = wsum = 0.0
            for k in range(math.floor(u) - 2, math.floor(u) + 4):
                wk = _cubic_direct(u - k)
                for m in range(math.floor(v) - 2, math.floor(v) + 4):
                    wm = _cubic_direct(v - m)
                    acc += wk * wm * src[min(max(k, 0), h - 1), min(max(m, 0), w - 1)]
                    wsum += wk * wm
            out[i, j] = acc / wsum
    return out


def test_bicubic_upscale_matches_direct_kernel_oracle(backend, rng):
    src = rng.uniform(0.3, 0.7, (5, 5))  # interior values: no clamping at output
    for size in ((13, 13), (11, 17), (5, 10)):
        got = resample(Image(src), size[1], size[0], BICUBIC).pixels
        assert np.max(np.abs(got - _upscale_oracle(src, *size))) < 1e-12


@pytest.mark.parametrize("kernel", [BICUBIC, BILINEAR, ResampleKernel("bicubic", False),
                                    ResampleKernel("bilinear", False)])
@pytest.mark.parametrize("target", [(1, 1), (3, 5), (8, 8), (29, 29), (40, 17)])
def test_constant_preserved(backend, kernel, target):
    out = resample(Image(np.full((23, 23), 0.5)), *target, kernel)
    assert out.pixels.shape == (target[1], target[0])
    assert np.max(np.abs(out.pixels - 0.5)) < 1e-12


def test_bilinear_antialias_halving_equals_block_means(backend):
    # profile with g[1] == g[2]: the widened tent's edge taps fold back onto equal values
    g = np.array([0.0, 0.5, 0.5, 1.0])
    ramp = (g[:, None] + g[None, :]) / 2
    block = ramp.reshape(2, 2, 2, 2).mean(axis=(1, 3))
    out = resample(Image(ramp), 2, 2, BILINEAR).pixels
    np.testing.assert_allclose(out, block, atol=1e-15)


def test_plain_bilinear_halving_of_linear_ramp_equals_block_means(backend):
    ramp = np.add.outer(np.arange(4), np.arange(4)) / 6.0
    block = ramp.reshape(2, 2, 2, 2).mean(axis=(1, 3))
    out = resample(Image(ramp), 2, 2, ResampleKernel("bilinear", False)).pixels
    np.testing.assert_allclose(out, block, atol=1e-15)


def test_resample_identity_size(backend, rng):
    src = rng.random((9, 9))
    assert resample(Image(src), 9, 9) == Image(src)


def test_resample_zero_target_rejected():
    with pytest.raises(ValueError):
        resample(Image(np.zeros((4, 4))), 0, 3)


def test_resample_clamps_overshoot(backend):
    step = np.zeros((8, 8))
    step[:, 4:] = 1.0
    out = resample(Image(step), 31, 31).pixels
    assert out.min() >= 0.0 and out.max() <= 1.0


# ---------------------------------------------------------------- target size

@pytest.mark.parametrize("n, side", [(2, 115), (4, 57), (6, 39), (8, 29), (10, 23), (12, 19),
                                     (14, 17), (16, 15)])
def test_target_size_ladder(n, side):
    assert target_size(231, Fraction(1, n)) == side


def test_target_size_identity():
    assert target_size(15, 1) == 15


@given(st.integers(1, 2000), st.integers(1, 40))
def test_target_size_is_nearest_odd(side, n):
    x = Fraction(side, n)
    got = target_size(side, Fraction(1, n))
    assert got % 2 == 1
    odd = [k for k in range(1, side + 3, 2)]
    best = min(abs(x - k) for k in odd)
    assert abs(x - got) == best


# ---------------------------------------------------------------- layouts

def _anchors_oracle(side, patch, step):
    anchors, a = [], 0
    while a + patch <= side:
        anchors.append(a)
        a += step
    if anchors[-1] + patch < side:
        anchors.append(side - patch)
    return anchors


def test_layout_231_quarter():
    lay = compute_layout(231, Fraction(1, 4), Fraction(1, 3))
    assert (lay.patch_side, lay.step) == (58, 39)
    assert list(lay.anchors) == [0, 39, 78, 117, 156, 173] == _anchors_oracle(231, 58, 39)
    assert lay.grid == (6, 6)


def test_layout_15_quarter():
    lay = compute_layout(15, Fraction(1, 4), Fraction(1, 3))
    assert (lay.patch_side, lay.step) == (4, 3)
    assert list(lay.anchors) == [0, 3, 6, 9, 11] == _anchors_oracle(15, 4, 3)
    assert lay.grid == (5, 5)


def test_layout_whole_image():
    lay = compute_layout(8, 1, Fraction(1, 3))
    assert lay.patch_side == 8 and lay.positions == [(0, 0)] and lay.grid == (1, 1)


def test_layout_patch_too_large():
    with pytest.raises(ValueError):
        compute_layout(1, Fraction(1, 4))


def _coverage(lay):
    cov = np.zeros((lay.image_side, lay.image_side), dtype=int)
    for r, c in lay.positions:
        assert r + lay.patch_side <= lay.image_side and c + lay.patch_side <= lay.image_side
        cov[r:r + lay.patch_side, c:c + lay.patch_side] += 1
    return cov


@given(st.integers(2, 260), st.sampled_from([Fraction(1, k) for k in (1, 2, 4, 8, 16, 32)]),
       st.sampled_from([Fraction(0), Fraction(1, 3), Fraction(1, 2)]))
def test_layout_invariants(side, frac, overlap):
    lay = compute_layout(side, frac, overlap)
    assert _coverage(lay).min() >= 1
    assert list(lay.anchors) == _anchors_oracle(side, lay.patch_side, lay.step)
    assert lay.positions == sorted(lay.positions)


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10, 12, 14, 16])
@pytest.mark.parametrize("frac", [4, 8, 16, 32])
def test_collocated_layouts_share_grid_and_cover(n, frac):
    hr = compute_layout(231, Fraction(1, frac))
    lr_side = target_size(231, Fraction(1, n))
    lr = collocated_layout(hr, lr_side)
    assert lr.grid == hr.grid
    assert _coverage(lr).min() >= 1
    hr_centres = (np.asarray(hr.anchors) + hr.patch_side / 2) * lr_side / 231
    lr_centres = np.asarray(lr.anchors) + lr.patch_side / 2
    assert np.max(np.abs(lr_centres - hr_centres)) < 1.0


def test_layout_rejects_gaps():
    with pytest.raises(ValueError):
        PatchLayout(10, 2, 4, (0, 4, 8))


# ---------------------------------------------------------------- patches

def test_single_patch_is_flattened_image(rng):
    img = Image(rng.random((6, 6)))
    p = extract_patches(img, compute_layout(6, 1))
    np.testing.assert_array_equal(p, img.data[None, :])


def test_disjoint_quadrants():
    arr = np.arange(16.0).reshape(4, 4) / 16
    lay = PatchLayout(4, 2, 2, (0, 2))
    p = extract_patches(Image(arr), lay)
    np.testing.assert_array_equal(p[0], arr[:2, :2].ravel())
    np.testing.assert_array_equal(p[1], arr[:2, 2:].ravel())
    np.testing.assert_array_equal(p[2], arr[2:, :2].ravel())
    np.testing.assert_array_equal(p[3], arr[2:, 2:].ravel())


def test_extract_dimension_mismatch():
    with pytest.raises(ValueError):
        extract_patches(Image(np.zeros((5, 5))), compute_layout(6, Fraction(1, 2)))


def test_stitch_constant(backend):
    lay = compute_layout(20, Fraction(1, 4))
    out = stitch_patches(extract_patches(Image(np.full((20, 20), 0.3)), lay), lay)
    assert np.all(out.pixels == 0.3)


def test_stitch_two_full_overlaps(backend):
    lay = PatchLayout(2, 2, 1, (0, 0))
    patches = np.zeros((4, 4))
    patches[1::2] = 1.0
    out = stitch_patches(patches, lay)
    np.testing.assert_array_equal(out.pixels, np.full((2, 2), 0.5))


def test_stitch_argument_errors():
    lay = compute_layout(8, Fraction(1, 2))
    with pytest.raises(ValueError):
        stitch_patches(np.zeros((lay.count - 1, lay.patch_side ** 2)), lay)
    with pytest.raises(ValueError):
        stitch_patches(np.zeros((lay.count, 3)), lay)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 48), st.sampled_from([Fraction(1, k) for k in (1, 2, 4, 8, 16, 32)]),
       st.sampled_from([Fraction(0), Fraction(1, 3), Fraction(2, 3)]), st.integers(0, 2 ** 32 - 1))
def test_roundtrip_bit_exact(side, frac, overlap, seed):
    img = Image(np.random.default_rng(seed).random((side, side)))
    lay = compute_layout(side, frac, overlap)
    assert stitch_patches(extract_patches(img, lay), lay) == img

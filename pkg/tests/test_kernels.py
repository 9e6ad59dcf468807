import numpy as np
import pytest

from eigensr import kernels
from eigensr.imgcore import _contributions

needs_ext = pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")
py, cy = kernels.python_backend, kernels.compiled_backend


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


@needs_ext
@pytest.mark.parametrize("in_len, out_len, kind, aa", [(231, 29, "bicubic", True), (29, 231, "bicubic", True),
                                                       (40, 17, "bilinear", True), (9, 9, "bicubic", False)])
def test_apply_weights_agree(rng, in_len, out_len, kind, aa):
    src = rng.random((13, in_len))
    idx, w = _contributions(in_len, out_len, kind, aa)
    assert np.max(np.abs(py.apply_weights(src, idx, w) - cy.apply_weights(src, idx, w))) < 1e-12


@needs_ext
def test_stitch_agree_exactly(rng):
    side, p = 30, 7
    anchors = np.array([0, 5, 10, 15, 20, 23])
    rows = np.repeat(anchors, anchors.size).astype(np.intp)
    cols = np.tile(anchors, anchors.size).astype(np.intp)
    patches = rng.random((rows.size, p * p))
    out_py, cnt_py = py.stitch_mean(patches, rows, cols, p, side)
    out_cy, cnt_cy = cy.stitch_mean(patches, rows, cols, p, side)
    np.testing.assert_array_equal(cnt_py, cnt_cy)
    np.testing.assert_allclose(out_py, out_cy, rtol=0, atol=1e-15)


@needs_ext
@pytest.mark.parametrize("max_shift", [0, 3, 8])
def test_hamming_agree_exactly(rng, max_shift):
    for _ in range(20):
        a_bits = rng.integers(0, 2, (20, 48, 2), dtype=np.uint8)
        b_bits = rng.integers(0, 2, (20, 48, 2), dtype=np.uint8)
        a_mask = (rng.random((20, 48)) > 0.2).astype(np.uint8)
        b_mask = (rng.random((20, 48)) > 0.2).astype(np.uint8)
        assert py.min_shift_hamming(a_bits, a_mask, b_bits, b_mask, max_shift) == \
            cy.min_shift_hamming(a_bits, a_mask, b_bits, b_mask, max_shift)


@pytest.mark.parametrize("mod", [m for m in (py, cy) if m is not None])
def test_hamming_empty_mask_returns_nan(mod):
    bits = np.zeros((2, 6, 2), dtype=np.uint8)
    mask = np.zeros((2, 6), dtype=np.uint8)
    hd, _ = mod.min_shift_hamming(bits, mask, bits, mask, 2)
    assert np.isnan(hd)

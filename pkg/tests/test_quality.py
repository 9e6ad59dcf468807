import math

import numpy as np
import pytest

from eigensr.imgcore import Image
from eigensr.quality import (SSIM_K1, SSIM_K2, fidelity, format_psnr, gaussian_window, psnr, ssim,
                             ssim_map)


def test_psnr_identical_is_infinite(rng):
    a = rng.random((20, 20))
    assert psnr(a, a) == math.inf
    assert format_psnr(psnr(a, a)) == "inf"


def test_psnr_uniform_offset(rng):
    a = rng.random((32, 32)) * (254 / 255)
    assert abs(psnr(a, a + 1 / 255) - 20 * math.log10(255)) < 1e-6


def test_psnr_extremes():
    assert psnr(np.zeros((4, 4)), np.ones((4, 4))) == pytest.approx(0.0, abs=1e-12)


def test_psnr_mask_restricts_region(rng):
    a = rng.random((10, 10))
    b = a.copy()
    b[:, 5:] += 0.1
    mask = np.zeros((10, 10), bool)
    mask[:, :5] = True
    assert psnr(a, b, mask) == math.inf
    assert psnr(a, b, ~mask) == pytest.approx(20.0)


def test_psnr_size_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_ssim_identical_is_one(rng):
    a = rng.random((30, 30))
    assert ssim(a, a) == 1.0


@pytest.mark.parametrize("u, v", [(0.2, 0.7), (0.5, 0.5), (0.0, 1.0), (0.31, 0.33)])
def test_ssim_constant_closed_form(u, v):
    c1 = SSIM_K1 ** 2
    expected = (2 * u * v + c1) / (u * u + v * v + c1)
    assert abs(ssim(np.full((16, 16), u), np.full((16, 16), v)) - expected) < 1e-10


def direct_ssim(a, b):
    """Non-separable reference: explicit 2D window at every valid position."""
    w2 = np.outer(gaussian_window(), gaussian_window())
    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    n = w2.shape[0]
    vals = []
    for i in range(a.shape[0] - n + 1):
        for j in range(a.shape[1] - n + 1):
            pa, pb = a[i:i + n, j:j + n], b[i:i + n, j:j + n]
            ma, mb = (w2 * pa).sum(), (w2 * pb).sum()
            va = (w2 * (pa - ma) ** 2).sum()
            vb = (w2 * (pb - mb) ** 2).sum()
            cov = (w2 * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_ssim_matches_direct_oracle(rng):
    a = rng.random((32, 32))
    b = np.clip(a + 0.1 * rng.normal(size=a.shape), 0, 1)
    assert abs(ssim(a, b) - direct_ssim(a, b)) < 1e-10


def test_ssim_properties(rng):
    a, b = rng.random((24, 24)), rng.random((24, 24))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-14)
    assert ssim(a, b) == pytest.approx(ssim(a[::-1, ::-1], b[::-1, ::-1]), abs=1e-12)
    assert ssim(a, b) <= 1.0
    assert ssim_map(a, b).shape == (14, 14)


def test_ssim_too_small():
    with pytest.raises(ValueError):
        ssim(np.zeros((10, 20)), np.zeros((10, 20)))


def test_ssim_mask(rng):
    a = rng.random((20, 20))
    b = a.copy()
    b[:, 12:] = 0.0
    mask = np.zeros((20, 20), bool)
    mask[5:15, 5:6] = True      # windows centred here never reach column 12
    assert ssim(a, b, mask) == 1.0
    with pytest.raises(ValueError):
        ssim(a, b, np.zeros((20, 20), bool))


def test_fidelity_report_csv(rng):
    a = Image(rng.random((16, 16)))
    rep = fidelity(a, a)
    assert rep.csv() == "inf,1.0"
    assert rep.region == "full_image"

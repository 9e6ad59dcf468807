"""Full-reference fidelity metrics (PSNR, SSIM) for images in [0, 1]."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imgcore import Image

PEAK = 1.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class FidelityReport:
    psnr_db: float
    ssim: float
    region: str = "full_image"

    def csv(self) -> str:
        return f"{format_psnr(self.psnr_db)},{self.ssim!r}"


def format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else repr(float(value))


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, Image) else np.asarray(img, dtype=np.float64)


def _check_pair(a, b):
    a, b = _pixels(a), _pixels(b)
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, mask=None) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0; ``inf`` for identical inputs."""
    a, b = _check_pair(a, b)
    diff = a - b
    if mask is not None:
        diff = diff[np.asarray(mask, dtype=bool)]
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1D Gaussian taps; the 2D window is their outer product."""
    half = (size - 1) / 2.0
    taps = np.exp(-0.5 * ((np.arange(size) - half) / sigma) ** 2)
    return taps / taps.sum()


def _filter_valid(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = taps.size
    rows = np.lib.stride_tricks.sliding_window_view(x, n, axis=1) @ taps
    return np.lib.stride_tricks.sliding_window_view(rows, n, axis=0) @ taps


def ssim_map(a, b) -> np.ndarray:
    """Local SSIM for every fully contained 11x11 window (valid region)."""
    a, b = _check_pair(a, b)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    taps = gaussian_window()
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    mu_a = _filter_valid(a, taps)
    mu_b = _filter_valid(b, taps)
    var_a = _filter_valid(a * a, taps) - mu_a * mu_a
    var_b = _filter_valid(b * b, taps) - mu_b * mu_b
    cov = _filter_valid(a * b, taps) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, mask=None) -> float:
    """Mean structural similarity (Gaussian 11x11 window, sigma 1.5, K1=0.01, K2=0.03).

    With ``mask``, only windows centred on masked pixels are averaged.
    """
    smap = ssim_map(a, b)
    if mask is not None:
        half = SSIM_WINDOW // 2
        m = np.asarray(mask, dtype=bool)[half:-half, half:-half]
        if not m.any():
            raise ValueError("mask selects no complete SSIM window")
        return float(smap[m].mean())
    return float(smap.mean())


def fidelity(reference, test, mask=None) -> FidelityReport:
    region = "full_image" if mask is None else "provided_mask"
    return FidelityReport(psnr(reference, test, mask), ssim(reference, test, mask), region)

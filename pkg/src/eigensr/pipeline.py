"""Glue shared by the CLI and the benchmarks: degradation, reconstruction, labeled sets."""
from __future__ import annotations

import logging
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .eigenpatch import DEFAULT_MAX_ITER, DEFAULT_TAU, DEFAULT_TOL, hallucinate
from .imgcore import BICUBIC, BILINEAR, Image, as_fraction, load_image, resample, target_size
from .iriseval import Sample, normalize_polar, parse_sample_id
from .quality import psnr, ssim
from .workers import pmap

log = logging.getLogger(__name__)

METHODS = ("bilinear", "bicubic", "pca")
IMAGE_SUFFIXES = (".pgm", ".png")
BENCH_HEADER = ["method", "factor", "patch", "psnr_full", "ssim_full", "psnr_polar", "ssim_polar"]


def list_images(directory) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"{directory} is not a directory")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def factor_of(n) -> Fraction:
    """``8`` or ``"1/8"`` -> ``Fraction(1, 8)``."""
    f = as_fraction(n)
    return 1 / f if f > 1 else f


def degrade(img: Image, factor) -> Image:
    """Bicubic antialiased downscale of a square image to the odd target size."""
    side = target_size(img.width, factor_of(factor))
    return resample(img, side, side, BICUBIC)


def super_resolve(lr: Image, method: str, hr_side: int, dictionary=None, reprojection: bool = True,
                  tau: float = DEFAULT_TAU, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> Image:
    if method == "bicubic":
        return resample(lr, hr_side, hr_side, BICUBIC)
    if method == "bilinear":
        return resample(lr, hr_side, hr_side, BILINEAR)
    if method == "pca":
        if dictionary is None:
            raise ValueError("method 'pca' needs a dictionary")
        if dictionary.hr_side != hr_side:
            raise ValueError(f"dictionary reconstructs {dictionary.hr_side}px images, not {hr_side}px")
        return hallucinate(lr, dictionary, reprojection, tau, tol, max_iter)
    raise ValueError(f"unknown method {method!r}")


def load_labeled_set(images_dir, annotations: dict) -> list:
    """``(image_id, Image, IrisAnnotation)`` for every annotated image in ``images_dir``."""
    out = []
    for path in list_images(images_dir):
        ann = annotations.get(path.stem)
        if ann is None:
            log.warning("%s has no annotation; skipped", path.name)
            continue
        out.append((path.stem, load_image(path), ann))
    return out


def reconstruct_set(items, method: str, factor, dictionary=None, **kwargs) -> list:
    """Degrade every HR item by ``factor`` and reconstruct it at HR size."""
    def one(item):
        _, img, _ = item
        return super_resolve(degrade(img, factor), method, img.width, dictionary, **kwargs)
    return pmap(one, items)


def make_samples(items, reconstructions) -> list:
    samples = []
    for (image_id, img, ann), sr in zip(items, reconstructions):
        user, index = parse_sample_id(image_id)
        samples.append(Sample(user, index, image_id, {"hr": img, "sr": sr}, ann))
    return samples


def _finite_mean(values, label):
    vals = np.asarray(values, dtype=np.float64)
    finite = vals[np.isfinite(vals)]
    skipped = vals.size - finite.size
    if skipped:
        log.info("%s: %d infinite PSNR values excluded from the mean", label, skipped)
    return float(finite.mean()) if finite.size else math.inf


def bench_row(items, reconstructions, method: str, factor, patch="") -> dict:
    """Mean PSNR/SSIM over full images and over their 20x240 polar versions."""
    full_p, full_s, pol_p, pol_s = [], [], [], []
    for (_, img, ann), sr in zip(items, reconstructions):
        full_p.append(psnr(img, sr))
        full_s.append(ssim(img, sr))
        ref_polar, sr_polar = normalize_polar(img, ann), normalize_polar(sr, ann)
        pol_p.append(psnr(ref_polar, sr_polar))
        pol_s.append(ssim(ref_polar, sr_polar))
    n = factor_of(factor).denominator
    return {
        "method": method,
        "factor": f"1/{n}",
        "patch": str(patch),
        "psnr_full": _finite_mean(full_p, f"{method} full"),
        "ssim_full": float(np.mean(full_s)),
        "psnr_polar": _finite_mean(pol_p, f"{method} polar"),
        "ssim_polar": float(np.mean(pol_s)),
    }

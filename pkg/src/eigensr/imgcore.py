"""Grayscale images, file I/O, resampling and overlapping patch tilings."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from . import kernels
from .errors import FormatError

__all__ = [
    "Image",
    "ResampleKernel",
    "PatchLayout",
    "BICUBIC",
    "BICUBIC_AA",
    "BILINEAR",
    "as_fraction",
    "load_image",
    "save_image",
    "resample",
    "resample_array",
    "gaussian_blur",
    "target_size",
    "compute_layout",
    "collocated_layout",
    "extract_patches",
    "stitch_patches",
]


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable grayscale raster with intensities in [0, 1].

    ``pixels`` is a read-only ``(height, width)`` float64 array. Values are
    clipped into [0, 1] on construction; non-finite values are rejected.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be a non-empty 2D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        np.clip(arr, 0.0, 1.0, out=arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> np.ndarray:
        """Row-major flattened intensities."""
        return self.pixels.ravel()

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    __hash__ = None

    def __repr__(self):
        return f"Image({self.width}x{self.height})"


def as_fraction(value) -> Fraction:
    """Parse ``1/4``, ``0.25``, ``Fraction(1, 4)`` or ``4`` style inputs."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10_000)
    return Fraction(value)


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


# ----------------------------------------------------------------------------
# file I/O

_SUPPORTED_FORMATS = {"PPM": "PGM", "PNG": "PNG"}


def load_image(path) -> Image:
    """Read an 8-bit PGM (P5) or 8-bit PNG; RGB PNGs are converted to luminance."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            fmt = im.format
            mode = im.mode
            if fmt not in _SUPPORTED_FORMATS:
                raise FormatError(f"{path}: unsupported file format {fmt!r}")
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise FormatError(f"{path}: unsupported bit depth for {_SUPPORTED_FORMATS[fmt]} (mode {mode})")
            if fmt == "PPM" and mode != "L":
                raise FormatError(f"{path}: expected grayscale PGM, got mode {mode}")
            if mode != "L":
                im = im.convert("L")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: unrecognised image format") from exc
    return Image(arr.astype(np.float64) / 255.0)


def save_image(img: Image, path) -> None:
    """Write as 8-bit PGM (``.pgm``) or PNG (``.png``)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        fmt = "PPM"
    elif suffix == ".png":
        fmt = "PNG"
    else:
        raise FormatError(f"{path}: cannot write format {suffix!r} (use .pgm or .png)")
    arr = np.round(img.pixels * 255.0).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(path, format=fmt)


# ----------------------------------------------------------------------------
# resampling

@dataclass(frozen=True)
class ResampleKernel:
    """Interpolation kernel. ``antialias`` widens the support by 1/scale when shrinking."""

    kind: str = "bicubic"
    antialias: bool = True

    def __post_init__(self):
        if self.kind not in ("bilinear", "bicubic"):
            raise ValueError(f"unknown kernel {self.kind!r}")


BICUBIC = ResampleKernel("bicubic", True)
BICUBIC_AA = BICUBIC
BILINEAR = ResampleKernel("bilinear", True)

_CUBIC_A = -0.5


def _cubic(x):
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    a = _CUBIC_A
    near = (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0
    far = a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def _triangle(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


@lru_cache(maxsize=256)
def _contributions(in_len: int, out_len: int, kind: str, antialias: bool):
    """Tap indices and normalized weights mapping ``in_len`` samples onto ``out_len``."""
    scale = out_len / in_len
    base, width = (_cubic, 4.0) if kind == "bicubic" else (_triangle, 2.0)
    if scale < 1.0 and antialias:
        def kern(x):
            return scale * base(scale * x)
        width = width / scale
    else:
        kern = base
    # pixel centres aligned: output sample o sits at input coordinate u
    u = (np.arange(out_len, dtype=np.float64) + 0.5) / scale - 0.5
    left = np.floor(u - width / 2.0).astype(np.intp)
    ntaps = int(math.ceil(width)) + 2
    idx = left[:, None] + np.arange(ntaps, dtype=np.intp)[None, :]
    w = kern(u[:, None] - idx)
    w = w / w.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, in_len - 1)
    keep = np.any(w != 0.0, axis=0)
    idx = np.ascontiguousarray(idx[:, keep])
    w = np.ascontiguousarray(w[:, keep])
    idx.setflags(write=False)
    w.setflags(write=False)
    return idx, w


def resample_array(arr: np.ndarray, target_w: int, target_h: int,
                   kernel: ResampleKernel = BICUBIC) -> np.ndarray:
    """Separable resampling of a raw 2D array (rows first, then columns), no clamping."""
    if target_w < 1 or target_h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {target_w}x{target_h}")
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    h, w = arr.shape
    if target_w != w:
        idx, wt = _contributions(w, target_w, kernel.kind, kernel.antialias)
        arr = kernels.apply_weights(arr, idx, wt)
    if target_h != h:
        idx, wt = _contributions(h, target_h, kernel.kind, kernel.antialias)
        arr = np.ascontiguousarray(kernels.apply_weights(np.ascontiguousarray(arr.T), idx, wt).T)
    return arr


def resample(img: Image, target_w: int, target_h: int, kernel: ResampleKernel = BICUBIC) -> Image:
    """Resize ``img`` to ``target_w`` x ``target_h`` with clamp-to-edge boundaries."""
    return Image(resample_array(img.pixels, target_w, target_h, kernel))


def gaussian_blur(arr: np.ndarray, sigma: float = 1.0, size: int = 3) -> np.ndarray:
    """Normalized square Gaussian smoothing with replicated borders."""
    half = size // 2
    taps = np.exp(-0.5 * (np.arange(-half, half + 1) / sigma) ** 2)
    taps /= taps.sum()
    padded = np.pad(arr, half, mode="edge")
    h, w = arr.shape
    rows = sum(taps[k] * padded[:, k:k + w] for k in range(size))
    return sum(taps[k] * rows[k:k + h, :] for k in range(size))


def target_size(source_side: int, factor) -> int:
    """Odd side length nearest to ``source_side * factor`` (ties go to the smaller one).

    >>> [target_size(231, Fraction(1, n)) for n in (2, 4, 6, 8, 10, 12, 14, 16)]
    [115, 57, 39, 29, 23, 19, 17, 15]
    """
    x = Fraction(source_side) * as_fraction(factor)
    lo = 2 * math.floor((x - 1) / 2) + 1
    hi = lo + 2
    best = lo if (x - lo) <= (hi - x) else hi
    return max(1, best)


# ----------------------------------------------------------------------------
# patch layouts

@dataclass(frozen=True)
class PatchLayout:
    """Square tiling of an ``image_side`` x ``image_side`` image into overlapping patches.

    ``anchors`` holds the top-left offsets along one axis; the same anchors are
    used for rows and columns.
    """

    image_side: int
    patch_side: int
    step: int
    anchors: tuple

    def __post_init__(self):
        if not (1 <= self.patch_side <= self.image_side):
            raise ValueError(f"patch side {self.patch_side} does not fit image side {self.image_side}")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        a = tuple(int(v) for v in self.anchors)
        object.__setattr__(self, "anchors", a)
        if not a or a[0] != 0 or any(y < x for x, y in zip(a, a[1:])):
            raise ValueError(f"anchors must start at 0 and be non-decreasing: {a}")
        if a[-1] + self.patch_side != self.image_side:
            raise ValueError("last patch must end at the image border")
        if any(y > x + self.patch_side for x, y in zip(a, a[1:])):
            raise ValueError("anchors leave uncovered pixels")

    @property
    def grid(self) -> tuple:
        return (len(self.anchors), len(self.anchors))

    @property
    def count(self) -> int:
        return len(self.anchors) ** 2

    @property
    def positions(self) -> list:
        return [(r, c) for r in self.anchors for c in self.anchors]

    def to_dict(self) -> dict:
        return {"image_side": self.image_side, "patch_side": self.patch_side,
                "step": self.step, "anchors": list(self.anchors)}

    @classmethod
    def from_dict(cls, d: dict) -> "PatchLayout":
        return cls(int(d["image_side"]), int(d["patch_side"]), int(d["step"]), tuple(d["anchors"]))


def compute_layout(image_side: int, patch_fraction, overlap_fraction=Fraction(1, 3)) -> PatchLayout:
    """Regular overlapping tiling; the final anchor is clamped to the border."""
    patch_fraction = as_fraction(patch_fraction)
    overlap_fraction = as_fraction(overlap_fraction)
    if not 0 <= overlap_fraction < 1:
        raise ValueError(f"overlap fraction must be in [0, 1), got {overlap_fraction}")
    patch = max(2, _round_half_up(image_side * patch_fraction))
    if patch > image_side:
        raise ValueError(f"patch side {patch} larger than image side {image_side}")
    step = max(1, _round_half_up(patch * (1 - overlap_fraction)))
    last = image_side - patch
    anchors = list(range(0, last + 1, step))
    if anchors[-1] != last:
        anchors.append(last)
    return PatchLayout(image_side, patch, step, tuple(anchors))


def collocated_layout(hr_layout: PatchLayout, lr_side: int) -> PatchLayout:
    """Map an HR tiling onto an ``lr_side`` image keeping the same patch grid.

    Patch centres are scaled by ``lr_side / hr_side`` and the LR anchors rounded
    around them, so patch ``i`` of both layouts covers the same relative region
    (centres agree to within one LR pixel, also when the LR patch is widened to
    the 2-pixel minimum).
    """
    ratio = Fraction(lr_side, hr_layout.image_side)
    patch = max(2, _round_half_up(hr_layout.patch_side * ratio))
    if patch > lr_side:
        raise ValueError(f"LR patch side {patch} larger than LR image side {lr_side}")
    last = lr_side - patch
    half_hr = Fraction(hr_layout.patch_side, 2)
    anchors = [min(last, max(0, _round_half_up((a + half_hr) * ratio - Fraction(patch, 2))))
               for a in hr_layout.anchors]
    anchors[0], anchors[-1] = 0, last
    step = max(1, _round_half_up(hr_layout.step * ratio))
    return PatchLayout(lr_side, patch, step, tuple(anchors))


def extract_patches(img: Image, layout: PatchLayout) -> np.ndarray:
    """Patches as rows of an ``(N, patch_side**2)`` array, ordered like ``layout.positions``."""
    arr = img.pixels if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    if arr.shape != (layout.image_side, layout.image_side):
        raise ValueError(f"image shape {arr.shape} does not match layout side {layout.image_side}")
    p = layout.patch_side
    windows = np.lib.stride_tricks.sliding_window_view(arr, (p, p))
    a = np.asarray(layout.anchors)
    return np.ascontiguousarray(windows[a][:, a].reshape(-1, p * p))


def stitch_array(patches: np.ndarray, layout: PatchLayout) -> np.ndarray:
    """Overlap-averaged reassembly without clamping."""
    patches = np.ascontiguousarray(patches, dtype=np.float64)
    p = layout.patch_side
    if patches.ndim != 2 or patches.shape[0] != layout.count or patches.shape[1] != p * p:
        raise ValueError(f"expected {layout.count} patches of length {p * p}, got shape {patches.shape}")
    pos = np.asarray(layout.positions, dtype=np.intp).reshape(-1, 2)
    out, _ = kernels.stitch_mean(patches, np.ascontiguousarray(pos[:, 0]),
                                 np.ascontiguousarray(pos[:, 1]), p, layout.image_side)
    return out


def stitch_patches(patches, layout: PatchLayout) -> Image:
    """Reassemble patches; every pixel is the mean of the patch values covering it."""
    return Image(stitch_array(np.asarray(patches, dtype=np.float64), layout))

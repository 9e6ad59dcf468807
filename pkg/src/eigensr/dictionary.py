"""Coupled LR/HR position-patch dictionaries: construction and persistence."""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .eigenpatch import EigenModel, fit_eigen
from .errors import FormatError, TruncatedFileError
from .imgcore import (BICUBIC, Image, PatchLayout, as_fraction, collocated_layout, compute_layout,
                      extract_patches, resample, target_size)
from .workers import pmap

log = logging.getLogger(__name__)

MAGIC = b"EPSR"
VERSION = 1


@dataclass(frozen=True, eq=False)
class CoupledDictionary:
    """Collocated LR/HR training patches for every patch position.

    Stacks are indexed ``[position, pixel, training_image]``; means are
    ``[position, pixel]``. ``eigen[i]`` is the eigen model of position ``i``.
    """

    scale_factor: Fraction
    hr_side: int
    lr_side: int
    hr_layout: PatchLayout
    lr_layout: PatchLayout
    lr_stacks: np.ndarray
    hr_stacks: np.ndarray
    lr_means: np.ndarray
    hr_means: np.ndarray
    eigen: tuple
    patch_fraction: Fraction
    overlap_fraction: Fraction
    variance_retention: float

    @property
    def n_train(self) -> int:
        return self.lr_stacks.shape[2]

    @property
    def n_positions(self) -> int:
        return self.hr_layout.count

    def metadata(self) -> dict:
        return {
            "scale_factor": str(self.scale_factor),
            "hr_side": self.hr_side,
            "lr_side": self.lr_side,
            "n_train": self.n_train,
            "n_positions": self.n_positions,
            "patch_fraction": str(self.patch_fraction),
            "overlap_fraction": str(self.overlap_fraction),
            "variance_retention": self.variance_retention,
            "hr_layout": self.hr_layout.to_dict(),
            "lr_layout": self.lr_layout.to_dict(),
            "retained_counts": [m.retained_count for m in self.eigen],
        }

    def __eq__(self, other):
        if not isinstance(other, CoupledDictionary):
            return NotImplemented
        if self.metadata() != other.metadata():
            return False
        arrays = ("lr_stacks", "hr_stacks", "lr_means", "hr_means")
        if not all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays):
            return False
        for a, b in zip(self.eigen, other.eigen):
            if a.total_variance != b.total_variance:
                return False
            for field in ("eigenvalues", "eigenvectors", "eigen_patches"):
                if not np.array_equal(getattr(a, field), getattr(b, field)):
                    return False
        return True

    __hash__ = None


def build_dictionary(hr_images, scale_factor, patch_fraction, overlap_fraction=Fraction(1, 3),
                     variance_retention: float = 0.99) -> CoupledDictionary:
    """Degrade the HR training images and fit per-position eigen models."""
    hr_images = list(hr_images)
    if len(hr_images) < 2:
        raise ValueError(f"need at least 2 training images, got {len(hr_images)}")
    side = hr_images[0].width
    for img in hr_images:
        if img.width != side or img.height != side:
            raise ValueError(f"training images must all be {side}x{side}, found {img.width}x{img.height}")
    scale_factor = as_fraction(scale_factor)
    patch_fraction = as_fraction(patch_fraction)
    overlap_fraction = as_fraction(overlap_fraction)

    lr_side = target_size(side, scale_factor)
    hr_layout = compute_layout(side, patch_fraction, overlap_fraction)
    lr_layout = collocated_layout(hr_layout, lr_side)

    lr_images = pmap(lambda im: resample(im, lr_side, lr_side, BICUBIC), hr_images)
    # (M, N, d) -> (N, d, M): one column per training image
    hr_stacks = np.ascontiguousarray(
        np.stack([extract_patches(im, hr_layout) for im in hr_images]).transpose(1, 2, 0))
    lr_stacks = np.ascontiguousarray(
        np.stack([extract_patches(im, lr_layout) for im in lr_images]).transpose(1, 2, 0))
    lr_means = lr_stacks.mean(axis=2)
    hr_means = hr_stacks.mean(axis=2)

    eigen = tuple(pmap(lambda i: fit_eigen(lr_stacks[i], lr_means[i], variance_retention),
                       range(hr_layout.count)))
    log.info("built dictionary: M=%d, %d positions, HR %d -> LR %d", len(hr_images),
             hr_layout.count, side, lr_side)
    return CoupledDictionary(scale_factor, side, lr_side, hr_layout, lr_layout, lr_stacks,
                             hr_stacks, lr_means, hr_means, eigen, patch_fraction,
                             overlap_fraction, float(variance_retention))


# ----------------------------------------------------------------------------
# persistence: "EPSR" | u32 version | u32 header length | JSON header |
# per position: 8 matrices, each u64 rows | u64 cols | f64 row-major data

def _write_matrix(fh, arr):
    arr = np.asarray(arr, dtype="<f8")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim == 0:
        arr = arr.reshape(1, 1)
    fh.write(struct.pack("<QQ", *arr.shape))
    fh.write(np.ascontiguousarray(arr).tobytes())


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(f"{self.path}: file truncated at byte {len(self.buf)}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def matrix(self) -> np.ndarray:
        rows, cols = struct.unpack("<QQ", self.take(16))
        data = self.take(8 * rows * cols)
        return np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(rows, cols)


def save_dictionary(dictionary: CoupledDictionary, path) -> None:
    """Write the binary container plus a ``.json`` manifest next to it."""
    path = Path(path)
    header = json.dumps(dictionary.metadata(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for i, model in enumerate(dictionary.eigen):
            for arr in (dictionary.lr_stacks[i], dictionary.hr_stacks[i], dictionary.lr_means[i],
                        dictionary.hr_means[i], model.eigenvalues, model.eigenvectors,
                        model.eigen_patches, np.float64(model.total_variance)):
                _write_matrix(fh, arr)
    manifest = dict(dictionary.metadata(), format="EPSR", version=VERSION, data_file=path.name)
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_dictionary(path) -> CoupledDictionary:
    path = Path(path)
    rd = _Reader(path.read_bytes(), path)
    magic = rd.take(4)
    if magic != MAGIC:
        raise FormatError(f"{path}: not a dictionary file (magic {magic!r})")
    version, header_len = struct.unpack("<II", rd.take(8))
    if version != VERSION:
        raise FormatError(f"{path}: unsupported dictionary version {version}")
    try:
        meta = json.loads(rd.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header") from exc

    hr_layout = PatchLayout.from_dict(meta["hr_layout"])
    lr_layout = PatchLayout.from_dict(meta["lr_layout"])
    lr_stacks, hr_stacks, lr_means, hr_means, eigen = [], [], [], [], []
    for _ in range(meta["n_positions"]):
        lr_stacks.append(rd.matrix())
        hr_stacks.append(rd.matrix())
        lr_means.append(rd.matrix()[:, 0])
        hr_means.append(rd.matrix()[:, 0])
        evals = rd.matrix()[:, 0]
        evecs = rd.matrix()
        patches = rd.matrix()
        total = float(rd.matrix()[0, 0])
        eigen.append(EigenModel(evals, evecs, patches, total))
    if rd.pos != len(rd.buf):
        raise FormatError(f"{path}: {len(rd.buf) - rd.pos} trailing bytes")
    return CoupledDictionary(
        Fraction(meta["scale_factor"]), int(meta["hr_side"]), int(meta["lr_side"]), hr_layout,
        lr_layout, np.stack(lr_stacks), np.stack(hr_stacks), np.stack(lr_means),
        np.stack(hr_means), tuple(eigen), Fraction(meta["patch_fraction"]),
        Fraction(meta["overlap_fraction"]), float(meta["variance_retention"]))

"""Per-position eigen-transformation, HR patch synthesis and back-projection."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .imgcore import (BICUBIC, Image, extract_patches, gaussian_blur, resample_array,
                      stitch_array)
from .workers import pmap

log = logging.getLogger(__name__)

DEFAULT_TAU = 0.02
DEFAULT_TOL = 1e-5
DEFAULT_MAX_ITER = 300
# sigma <= ~0.8 keeps the 3x3 kernel's frequency response positive, so the
# reprojection operator stays positive definite and the residual cannot grow
RESIDUAL_BLUR_SIGMA = 0.6


@dataclass(frozen=True, eq=False)
class EigenModel:
    """Truncated PCA of one patch position, computed through the M x M Gram matrix.

    ``eigenvectors`` are eigenvectors of the Gram matrix (M x r), and
    ``eigen_patches`` the corresponding unit-norm pixel-space basis (d_L x r).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    eigen_patches: np.ndarray
    total_variance: float

    @property
    def retained_count(self) -> int:
        return int(self.eigenvalues.shape[0])


def _orient(vectors: np.ndarray) -> np.ndarray:
    # eigh signs are arbitrary: make the first (near-)largest entry of each column positive
    if vectors.size == 0:
        return vectors
    mags = np.abs(vectors)
    pivot = np.argmax(mags >= mags.max(axis=0) * (1 - 1e-9), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def fit_eigen(lr_stack: np.ndarray, lr_mean: np.ndarray, variance_retention: float = 0.99) -> EigenModel:
    """Fit the eigen model of one LR patch stack (columns are training patches)."""
    lr_stack = np.asarray(lr_stack, dtype=np.float64)
    lr_mean = np.asarray(lr_mean, dtype=np.float64)
    if not (np.all(np.isfinite(lr_stack)) and np.all(np.isfinite(lr_mean))):
        raise ValueError("patch stack contains non-finite values")
    if lr_stack.ndim != 2 or lr_mean.shape != (lr_stack.shape[0],):
        raise ValueError(f"stack {lr_stack.shape} and mean {lr_mean.shape} do not agree")
    d, m = lr_stack.shape
    if m < 2:
        raise ValueError("at least two training patches are required")
    if not 0.0 < variance_retention <= 1.0:
        raise ValueError(f"variance retention must be in (0, 1], got {variance_retention}")

    centred = lr_stack - lr_mean[:, None]
    gram = centred.T @ centred
    evals, evecs = np.linalg.eigh(gram)
    evals, evecs = evals[::-1], evecs[:, ::-1]

    lam_max = evals[0] if evals.size else 0.0
    # spread at the level of the mean's rounding error is not variance
    noise = max(m, d) * np.finfo(np.float64).eps * float(np.max(np.abs(lr_stack), initial=0.0))
    if lam_max <= 0.0 or float(np.max(np.abs(centred))) <= noise:
        return _empty_model(d, m)
    eps_eig = max(m, d) * np.finfo(np.float64).eps * lam_max
    positive = evals >= eps_eig
    evals, evecs = evals[positive], evecs[:, positive]

    cumulative = np.cumsum(evals)
    total = float(cumulative[-1])
    r = int(np.searchsorted(cumulative, variance_retention * total, side="left")) + 1
    r = min(r, evals.size)
    evals = evals[:r]
    evecs = _orient(evecs[:, :r])
    patches = centred @ evecs / np.sqrt(evals)
    return EigenModel(evals, evecs, patches, total)


def _empty_model(d: int, m: int) -> EigenModel:
    return EigenModel(np.zeros(0), np.zeros((m, 0)), np.zeros((d, 0)), 0.0)


def project_weights(model: EigenModel, lr_mean: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Reconstruction weights (length M) of input patch ``x`` in the eigen-space."""
    x = np.asarray(x, dtype=np.float64)
    d, m = model.eigen_patches.shape[0], model.eigenvectors.shape[0]
    if x.shape != (d,) or np.shape(lr_mean) != (d,):
        raise ValueError(f"patch length {x.shape} does not match model dimension {d}")
    if model.retained_count == 0:
        return np.zeros(m)
    w = model.eigen_patches.T @ (x - lr_mean)
    return model.eigenvectors @ (w / np.sqrt(model.eigenvalues))


def reconstruct_hr_patch(weights: np.ndarray, hr_stack: np.ndarray, hr_mean: np.ndarray) -> np.ndarray:
    """Weighted sum of the raw HR training patches plus the HR mean patch."""
    weights = np.asarray(weights, dtype=np.float64)
    hr_stack = np.asarray(hr_stack, dtype=np.float64)
    if hr_stack.ndim != 2 or weights.shape != (hr_stack.shape[1],) or np.shape(hr_mean) != (hr_stack.shape[0],):
        raise ValueError("weights, HR stack and HR mean dimensions do not agree")
    return hr_stack @ weights + hr_mean


def hallucinate_preliminary(x: Image, dictionary) -> np.ndarray:
    """Stitched HR estimate before reprojection (unclamped array)."""
    if (x.height, x.width) != (dictionary.lr_side, dictionary.lr_side):
        raise ValueError(f"input is {x.width}x{x.height}, dictionary expects "
                         f"{dictionary.lr_side}x{dictionary.lr_side}")
    lr_patches = extract_patches(x, dictionary.lr_layout)

    def one(i):
        c = project_weights(dictionary.eigen[i], dictionary.lr_means[i], lr_patches[i])
        return reconstruct_hr_patch(c, dictionary.hr_stacks[i], dictionary.hr_means[i])

    hr_patches = np.stack(pmap(one, range(dictionary.hr_layout.count)))
    return stitch_array(hr_patches, dictionary.hr_layout)


def hallucinate(x: Image, dictionary, reprojection: bool = True, tau: float = DEFAULT_TAU,
                tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> Image:
    """Super-resolve ``x`` with a coupled position-patch dictionary."""
    y0 = Image(hallucinate_preliminary(x, dictionary))
    if not reprojection:
        return y0
    return reproject(y0, x, tau=tau, tol=tol, max_iter=max_iter)


@dataclass
class ReprojectionTrace:
    iterations: int = 0
    converged: bool = False
    residual_norms: list = None
    updates: list = None


def _degrade(y: np.ndarray, lr_w: int, lr_h: int) -> np.ndarray:
    return resample_array(y, lr_w, lr_h, BICUBIC)


def reproject(y0: Image, x: Image, tau: float = DEFAULT_TAU, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER, trace: ReprojectionTrace | None = None) -> Image:
    """Back-project the LR residual until the mean absolute update drops below ``tol``.

    Each step is ``y <- y - tau * U(B(DB(y) - x))`` with DB the antialiased
    bicubic downscale, B a 3x3 Gaussian on the LR grid and U the
    bicubic upscale. Intermediate iterates are not clamped.
    """
    if tau <= 0 or tol <= 0:
        raise ValueError("tau and tol must be positive")
    if max_iter < 0:
        raise ValueError("max_iter must be non-negative")
    hr_h, hr_w = y0.pixels.shape
    lr_h, lr_w = x.pixels.shape
    if lr_h > hr_h or lr_w > hr_w:
        raise ValueError("LR input is larger than the HR estimate")
    y = y0.pixels.copy()
    target = x.pixels
    if trace is not None:
        trace.residual_norms, trace.updates = [], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        residual = _degrade(y, lr_w, lr_h) - target
        update = tau * resample_array(gaussian_blur(residual, RESIDUAL_BLUR_SIGMA, 3), hr_w, hr_h, BICUBIC)
        y -= update
        step = float(np.mean(np.abs(update)))
        if trace is not None:
            trace.residual_norms.append(float(np.linalg.norm(residual)))
            trace.updates.append(step)
        if step < tol:
            converged = True
            break
    if trace is not None:
        trace.iterations = it
        trace.converged = converged
    if not converged and max_iter > 0:
        log.debug("reprojection stopped at max_iter=%d", max_iter)
    return Image(y)

"""Seeded procedural iris-like images standing in for a real aligned iris corpus.

Every image is centred on the pupil. An identity fixes the pupil and iris radii
and a texture made of angular/radial sinusoids plus dark crypts; each sample of
that identity applies a small rotation, a contrast/brightness change and faint
sensor noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import Image
from .iriseval import IrisAnnotation

PUPIL_LEVEL = 0.08
SCLERA_LEVEL = 0.78
IRIS_LEVEL = 0.42


@dataclass(frozen=True)
class IdentityParams:
    pupil_radius: float
    iris_radius: float
    waves: np.ndarray      # rows: amplitude, angular order, radial frequency, phase
    crypts: np.ndarray     # rows: radial position, angle, angular width, radial width, depth
    collarette: float      # radial position of the collarette ring
    iris_level: float


def identity_params(side: int, seed: int, identity: int) -> IdentityParams:
    rng = np.random.default_rng([seed, identity, 0])
    n_waves, n_crypts = 14, 10
    waves = np.column_stack([
        rng.uniform(0.02, 0.07, n_waves),
        rng.integers(3, 22, n_waves).astype(float),
        rng.uniform(0.0, 4.0, n_waves),
        rng.uniform(0.0, 2 * np.pi, n_waves),
    ])
    crypts = np.column_stack([
        rng.uniform(0.15, 0.9, n_crypts),
        rng.uniform(0.0, 2 * np.pi, n_crypts),
        rng.uniform(0.08, 0.25, n_crypts),
        rng.uniform(0.05, 0.12, n_crypts),
        rng.uniform(0.08, 0.2, n_crypts),
    ])
    return IdentityParams(
        pupil_radius=side * rng.uniform(0.13, 0.19),
        iris_radius=side * rng.uniform(0.40, 0.45),
        waves=waves,
        crypts=crypts,
        collarette=rng.uniform(0.25, 0.4),
        iris_level=IRIS_LEVEL + rng.uniform(-0.06, 0.06),
    )


def _smoothstep(edge: np.ndarray, width: float = 1.0) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-edge / width))


def render(side: int, params: IdentityParams, rotation: float = 0.0, gain: float = 1.0,
           offset: float = 0.0, noise: np.ndarray | None = None) -> Image:
    c = side // 2
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    dx, dy = xx - c, yy - c
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx) - rotation
    pr, ir = params.pupil_radius, params.iris_radius
    rho = np.clip((r - pr) / (ir - pr), 0.0, 1.0)

    tex = np.full_like(r, params.iris_level)
    tex += 0.06 * (1.0 - rho)
    for amp, order, radial, phase in params.waves:
        tex += amp * np.cos(order * theta + 2 * np.pi * radial * rho + phase)
    for pos, ang, aw, rw, depth in params.crypts:
        dang = np.angle(np.exp(1j * (theta - ang)))
        tex -= depth * np.exp(-0.5 * ((rho - pos) / rw) ** 2 - 0.5 * (dang / aw) ** 2)
    tex += 0.05 * np.exp(-0.5 * ((rho - params.collarette) / 0.03) ** 2) * (
        1.0 + np.cos(9 * theta + 3 * params.collarette))

    inside_iris = _smoothstep(ir - r)
    outside_pupil = _smoothstep(r - pr)
    img = SCLERA_LEVEL * (1.0 - inside_iris) + inside_iris * (
        PUPIL_LEVEL * (1.0 - outside_pupil) + outside_pupil * tex)
    img = gain * img + offset
    if noise is not None:
        img = img + noise
    return Image(img)


def generate_corpus(count: int, side: int = 231, seed: int = 7, samples_per_identity: int = 3):
    """Yield ``(image_id, Image, IrisAnnotation)`` for ``count`` identities."""
    if side % 2 == 0 or side < 63:
        raise ValueError(f"side must be odd and >= 63, got {side}")
    if count < 1 or samples_per_identity < 2:
        raise ValueError("need at least 1 identity and 2 samples per identity")
    c = float(side // 2)
    for ident in range(count):
        params = identity_params(side, seed, ident)
        for k in range(1, samples_per_identity + 1):
            rng = np.random.default_rng([seed, ident, k])
            rotation = np.deg2rad(rng.uniform(-3.0, 3.0))
            gain = rng.uniform(0.9, 1.1)
            offset = rng.uniform(-0.03, 0.03)
            noise = rng.normal(0.0, 0.01, (side, side))
            image_id = f"u{ident:03d}_{k}"
            img = render(side, params, rotation, gain, offset, noise)
            ann = IrisAnnotation(image_id, (c, c), params.pupil_radius, params.iris_radius)
            yield image_id, img, ann

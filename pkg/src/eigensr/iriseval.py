"""Iris recognition layer: rubber-sheet unwrapping, log-Gabor codes, matching protocols.

Only the 1D log-Gabor comparator is provided. Other comparators can be plugged
into :func:`run_verification` / :func:`run_identification` by implementing
``template(image, annotation)``, ``compare(t1, t2)`` and ``polarity``.
"""
from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import map_coordinates

from . import kernels
from .errors import FormatError, UndefinedScoreError
from .imgcore import Image

log = logging.getLogger(__name__)

POLAR_ROWS = 20
POLAR_COLS = 240
LG_WAVELENGTH = 18.0
LG_SIGMA_OVER_F = 0.5
LG_AMP_EPS = 1e-4
LG_MAX_SHIFT = 8


# ----------------------------------------------------------------------------
# annotations

@dataclass(frozen=True)
class IrisAnnotation:
    """Segmentation ground truth; both circles share the pupil centre ``(x, y)``."""

    image_id: str
    pupil_center: tuple
    pupil_radius: float
    iris_radius: float

    def __post_init__(self):
        if not 0 < self.pupil_radius < self.iris_radius:
            raise ValueError(f"{self.image_id}: need 0 < pupil radius < iris radius, got "
                             f"{self.pupil_radius}, {self.iris_radius}")

    def check_inside(self, width: int, height: int) -> None:
        x, y = self.pupil_center
        r = self.iris_radius
        if x - r < 0 or y - r < 0 or x + r > width - 1 or y + r > height - 1:
            raise ValueError(f"{self.image_id}: iris circle (x={x}, y={y}, r={r}) leaves the "
                             f"{width}x{height} image")


ANNOTATION_FIELDS = ["image_id", "px", "py", "pr", "ix", "iy", "ir"]


def read_annotations(path) -> dict:
    """Parse ``image_id,px,py,pr,ix,iy,ir`` rows (``ix``/``iy`` optional and ignored)."""
    path = Path(path)
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"image_id", "px", "py", "pr", "ir"} - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: annotation CSV lacks columns {sorted(missing)}")
        for row in reader:
            ann = IrisAnnotation(row["image_id"], (float(row["px"]), float(row["py"])),
                                 float(row["pr"]), float(row["ir"]))
            out[ann.image_id] = ann
    return out


def write_annotations(path, annotations) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ANNOTATION_FIELDS)
        for ann in annotations:
            x, y = ann.pupil_center
            writer.writerow([ann.image_id, repr(float(x)), repr(float(y)), repr(float(ann.pupil_radius)),
                             repr(float(x)), repr(float(y)), repr(float(ann.iris_radius))])


# ----------------------------------------------------------------------------
# normalization and encoding

def normalize_polar(img: Image, ann: IrisAnnotation, rows: int = POLAR_ROWS,
                    cols: int = POLAR_COLS) -> Image:
    """Rubber-sheet unwrapping of the iris annulus into a ``rows`` x ``cols`` image.

    Row ``i`` samples the radial fraction ``(i + 1) / rows`` between the pupil
    and iris circles, column ``j`` the angle ``2*pi*j / cols``.
    """
    ann.check_inside(img.width, img.height)
    theta = 2.0 * np.pi * np.arange(cols) / cols
    t = (np.arange(rows) + 1.0) / rows
    radius = ann.pupil_radius + t[:, None] * (ann.iris_radius - ann.pupil_radius)
    x = ann.pupil_center[0] + radius * np.cos(theta)[None, :]
    y = ann.pupil_center[1] + radius * np.sin(theta)[None, :]
    return Image(map_coordinates(img.pixels, [y, x], order=1, mode="nearest"))


@dataclass(frozen=True, eq=False)
class IrisCode:
    """Phase-quadrant code: ``bits[r, c] = (real > 0, imag > 0)``; ``mask`` marks valid cells."""

    bits: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.bits.shape != self.mask.shape + (2,):
            raise ValueError(f"bits {self.bits.shape} do not match mask {self.mask.shape}")

    @property
    def shape(self):
        return self.mask.shape

    def __eq__(self, other):
        if not isinstance(other, IrisCode):
            return NotImplemented
        return np.array_equal(self.bits, other.bits) and np.array_equal(self.mask, other.mask)

    __hash__ = None


def loggabor_filter(n: int, wavelength: float = LG_WAVELENGTH,
                    sigma_over_f: float = LG_SIGMA_OVER_F) -> np.ndarray:
    """One-sided log-Gabor transfer function over the ``n`` FFT bins (zero at DC)."""
    half = n // 2
    radius = np.arange(half + 1) / half / 2.0
    radius[0] = 1.0
    f0 = 1.0 / wavelength
    g = np.exp(-(np.log(radius / f0) ** 2) / (2.0 * np.log(sigma_over_f) ** 2))
    g[0] = 0.0
    out = np.zeros(n)
    out[:half + 1] = g
    return out


def loggabor_response(polar, wavelength: float = LG_WAVELENGTH,
                      sigma_over_f: float = LG_SIGMA_OVER_F) -> np.ndarray:
    data = polar.pixels if isinstance(polar, Image) else np.asarray(polar, dtype=np.float64)
    filt = loggabor_filter(data.shape[1], wavelength, sigma_over_f)
    return np.fft.ifft(np.fft.fft(data, axis=1) * filt[None, :], axis=1)


def encode_loggabor(polar, wavelength: float = LG_WAVELENGTH, sigma_over_f: float = LG_SIGMA_OVER_F,
                    amp_eps: float = LG_AMP_EPS) -> IrisCode:
    """Filter each polar row with a 1D log-Gabor and quantize the phase to 2 bits."""
    data = polar.pixels if isinstance(polar, Image) else np.asarray(polar, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] < 4 * wavelength:
        raise ValueError(f"polar image of shape {data.shape} too narrow for wavelength {wavelength}")
    resp = loggabor_response(data, wavelength, sigma_over_f)
    bits = np.stack([resp.real > 0, resp.imag > 0], axis=-1).astype(np.uint8)
    mask = (np.abs(resp) >= amp_eps).astype(np.uint8)
    return IrisCode(np.ascontiguousarray(bits), np.ascontiguousarray(mask))


def match_codes(a: IrisCode, b: IrisCode, max_shift: int = LG_MAX_SHIFT) -> float:
    """Minimum masked fractional Hamming distance over circular shifts of ``b``."""
    if a.shape != b.shape:
        raise ValueError(f"code shapes differ: {a.shape} vs {b.shape}")
    hd, _ = kernels.min_shift_hamming(a.bits, a.mask, b.bits, b.mask, int(max_shift))
    if math.isnan(hd):
        raise UndefinedScoreError("no jointly valid cells at any shift")
    return float(hd)


@dataclass(frozen=True)
class LogGaborComparator:
    """Log-Gabor comparator: 20x240 rubber sheet, 1D log-Gabor, shifted Hamming distance."""

    rows: int = POLAR_ROWS
    cols: int = POLAR_COLS
    wavelength: float = LG_WAVELENGTH
    sigma_over_f: float = LG_SIGMA_OVER_F
    amp_eps: float = LG_AMP_EPS
    max_shift: int = LG_MAX_SHIFT
    polarity: str = "distance"

    def template(self, img: Image, ann: IrisAnnotation) -> IrisCode:
        polar = normalize_polar(img, ann, self.rows, self.cols)
        return encode_loggabor(polar, self.wavelength, self.sigma_over_f, self.amp_eps)

    def compare(self, a: IrisCode, b: IrisCode) -> float:
        return match_codes(a, b, self.max_shift)


# ----------------------------------------------------------------------------
# protocols

@dataclass
class Sample:
    """One acquisition: ``images`` maps a variant name (``"hr"``, ``"sr"``) to an image."""

    user: str
    index: int
    image_id: str
    images: dict
    annotation: IrisAnnotation


def parse_sample_id(image_id: str) -> tuple:
    """``"u007_2"`` -> ``("u007", 2)``: the text after the last underscore is the sample index."""
    user, sep, idx = image_id.rpartition("_")
    digits = "".join(ch for ch in idx if ch.isdigit())
    if not sep or not digits:
        raise ValueError(f"cannot parse user/index from image id {image_id!r}")
    return user, int(digits)


SCENARIOS = {1: ("hr", "sr"), 2: ("sr", "sr")}


def _scenario_variants(scenario) -> tuple:
    key = {"hr_vs_sr": 1, "sr_vs_sr": 2}.get(scenario, scenario)
    try:
        return SCENARIOS[int(key)]
    except (KeyError, ValueError, TypeError):
        raise ValueError(f"unknown scenario {scenario!r}") from None


class _TemplateCache:
    def __init__(self, comparator):
        self.comparator = comparator
        self.cache = {}

    def __call__(self, sample: Sample, variant: str):
        key = (sample.image_id, variant)
        if key not in self.cache:
            self.cache[key] = self.comparator.template(sample.images[variant], sample.annotation)
        return self.cache[key]


def _group(samples) -> list:
    groups = defaultdict(list)
    for s in samples:
        groups[s.user].append(s)
    return [(u, sorted(groups[u], key=lambda s: s.index)) for u in sorted(groups)]


@dataclass
class ScoreSet:
    genuine: np.ndarray
    impostor: np.ndarray
    polarity: str = "distance"
    pairs: list = field(default_factory=list, repr=False)

    def rows(self):
        for s in self.genuine:
            yield "genuine", float(s)
        for s in self.impostor:
            yield "impostor", float(s)


def run_verification(samples, comparator, scenario=2) -> ScoreSet:
    """Genuine: every same-user pair once. Impostor: 1st sample of a user vs 2nd of each other user."""
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    enrol_v, query_v = _scenario_variants(scenario)
    tmpl = _TemplateCache(comparator)
    groups = _group(samples)
    genuine, impostor, pairs = [], [], []
    for _, items in groups:
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                genuine.append(comparator.compare(tmpl(items[i], enrol_v), tmpl(items[j], query_v)))
                pairs.append(("genuine", items[i].image_id, items[j].image_id))
    skipped = [u for u, items in groups if len(items) < 2]
    if skipped:
        log.info("%d users have no 2nd sample and are not used as impostor targets", len(skipped))
    for u, items in groups:
        for v, others in groups:
            if v == u or len(others) < 2:
                continue
            impostor.append(comparator.compare(tmpl(items[0], enrol_v), tmpl(others[1], query_v)))
            pairs.append(("impostor", items[0].image_id, others[1].image_id))
    return ScoreSet(np.asarray(genuine, dtype=np.float64), np.asarray(impostor, dtype=np.float64),
                    comparator.polarity, pairs)


def verification_pair_counts(sample_counts: dict) -> tuple:
    """Closed-form (genuine, impostor) counts for per-user sample counts."""
    genuine = sum(n * (n - 1) // 2 for n in sample_counts.values())
    impostor = sum(sum(1 for v, m in sample_counts.items() if v != u and m >= 2)
                   for u, n in sample_counts.items() if n >= 1)
    return genuine, impostor


@dataclass
class EERResult:
    eer: float
    threshold: float
    det_points: list
    thresholds: list


def _as_distance(scores: ScoreSet):
    g = np.asarray(scores.genuine, dtype=np.float64)
    i = np.asarray(scores.impostor, dtype=np.float64)
    if g.size == 0 or i.size == 0:
        raise ValueError("EER needs non-empty genuine and impostor score lists")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(i))):
        raise ValueError("scores must be finite")
    if scores.polarity == "distance":
        return g, i, 1.0
    if scores.polarity == "similarity":
        return -g, -i, -1.0
    raise ValueError(f"unknown polarity {scores.polarity!r}")


def det_curve(scores: ScoreSet):
    """(thresholds, FAR, FRR) for every distinct score used as a decision threshold.

    A comparison is accepted when its distance is <= threshold (>= for similarities).
    """
    g, i, sign = _as_distance(scores)
    thr = np.unique(np.concatenate([g, i]))
    far = np.searchsorted(np.sort(i), thr, side="right") / i.size
    frr = 1.0 - np.searchsorted(np.sort(g), thr, side="right") / g.size
    return thr * sign, far, frr


def _lower_hull(points):
    hull = []
    for p in points:
        while len(hull) >= 2:
            (x1, y1, _), (x2, y2, _) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def compute_eer(scores: ScoreSet) -> EERResult:
    """Equal error rate on the convex hull of the DET operating points.

    Operating points are the (FAR, FRR) pairs of every distinct threshold plus
    the reject-all point (0, 1); the EER is where the hull crosses FAR = FRR,
    interpolated linearly between the two bracketing hull vertices.
    """
    thr, far, frr = det_curve(scores)
    start = thr[0] - 1.0 if scores.polarity == "distance" else thr[0] + 1.0
    pts = [(0.0, 1.0, start)] + list(zip(far.tolist(), frr.tolist(), thr.tolist()))
    hull = _lower_hull(sorted(pts, key=lambda p: (p[0], p[1])))
    eer, threshold = None, None
    for (x1, y1, t1), (x2, y2, t2) in zip(hull, hull[1:]):
        d1, d2 = x1 - y1, x2 - y2
        if d1 <= 0.0 <= d2:
            alpha = 0.0 if d2 == d1 else -d1 / (d2 - d1)
            eer = x1 + alpha * (x2 - x1)
            threshold = t1 + alpha * (t2 - t1)
            break
    if eer is None:  # single hull point on the diagonal
        x, y, t = hull[0]
        eer, threshold = x, t
    return EERResult(float(eer), float(threshold), list(zip(far.tolist(), frr.tolist())), thr.tolist())


@dataclass
class IdentificationResult:
    top_k: dict
    cmc: list
    ranks: list
    n_users: int
    n_probes: int
    ties: int


def run_identification(samples, comparator, scenario=2) -> IdentificationResult:
    """Closed-set identification: first sample of each user enrols, the others probe."""
    enrol_v, query_v = _scenario_variants(scenario)
    groups = [(u, items) for u, items in _group(samples) if len(items) >= 2]
    if len(groups) < 2:
        raise ValueError("identification needs at least 2 users with 2 or more samples")
    tmpl = _TemplateCache(comparator)
    gallery = [tmpl(items[0], enrol_v) for _, items in groups]
    sign = 1.0 if comparator.polarity == "distance" else -1.0
    ranks, ties = [], 0
    for g_idx, (_, items) in enumerate(groups):
        for probe in items[1:]:
            q = tmpl(probe, query_v)
            s = np.array([sign * comparator.compare(t, q) for t in gallery])
            # stable sort: equal scores keep user-id order
            order = np.argsort(s, kind="stable")
            ranks.append(int(np.nonzero(order == g_idx)[0][0]) + 1)
            if np.count_nonzero(s == s[g_idx]) > 1:
                ties += 1
    if ties:
        log.info("%d probes had tied scores; ties broken by user id order", ties)
    k_users = len(groups)
    ranks_arr = np.asarray(ranks)
    cmc = [float(np.mean(ranks_arr <= k)) for k in range(1, k_users + 1)]
    return IdentificationResult({1: cmc[0]}, cmc, ranks, k_users, len(ranks), ties)

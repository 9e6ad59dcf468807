"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N time for each backend and the
speedup. The compiled backend must be built (``pip install -e .``).
"""
import argparse
import time
from fractions import Fraction

import numpy as np

from eigensr import kernels
from eigensr.imgcore import _contributions, compute_layout, extract_patches, Image


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    # bicubic taps for one reprojection round trip (231 <-> 29)
    src_hr = rng.random((231, 231))
    src_lr = rng.random((29, 29))
    down = _contributions(231, 29, "bicubic", True)
    up = _contributions(29, 231, "bicubic", True)
    yield "apply_weights 231->29", lambda m: m.apply_weights(src_hr, *down)
    yield "apply_weights 29->231", lambda m: m.apply_weights(src_lr, *up)

    lay = compute_layout(231, Fraction(1, 4), Fraction(1, 3))
    patches = extract_patches(Image(rng.random((231, 231))), lay)
    rows = np.array([r for r, _ in lay.positions], dtype=np.intp)
    cols = np.array([c for _, c in lay.positions], dtype=np.intp)
    yield "stitch_mean 231px 6x6", lambda m: m.stitch_mean(patches, rows, cols, lay.patch_side, 231)

    a_bits = rng.integers(0, 2, (20, 240, 2), dtype=np.uint8)
    b_bits = rng.integers(0, 2, (20, 240, 2), dtype=np.uint8)
    mask = np.ones((20, 240), dtype=np.uint8)
    yield "min_shift_hamming 20x240", lambda m: m.min_shift_hamming(a_bits, mask, b_bits, mask, 8)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled_backend is None:
        raise SystemExit("compiled backend not available; build the extension first")
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, call in cases(rng):
        t_py = best_of(lambda: call(kernels.python_backend), args.repeat)
        t_cy = best_of(lambda: call(kernels.compiled_backend), args.repeat)
        print(f"{name:28s} {t_py * 1e3:10.3f} {t_cy * 1e3:10.3f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()

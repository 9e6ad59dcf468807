"""Pure-numpy versions of the compiled kernels (same arithmetic order)."""
import numpy as np


def apply_weights(src, idx, w):
    """Resample every row of ``src`` with per-output-sample taps."""
    out = np.zeros((src.shape[0], idx.shape[0]))
    for k in range(idx.shape[1]):
        out += src[:, idx[:, k]] * w[:, k]
    return out


def stitch_mean(patches, rows, cols, patch_side, side):
    """Running per-pixel mean of overlapping square patches."""
    out = np.zeros((side, side))
    cnt = np.zeros((side, side))
    blocks = patches.reshape(-1, patch_side, patch_side)
    for block, r0, c0 in zip(blocks, rows, cols):
        window = (slice(r0, r0 + patch_side), slice(c0, c0 + patch_side))
        cnt[window] += 1.0
        out[window] += (block - out[window]) / cnt[window]
    return out, cnt


def min_shift_hamming(a_bits, a_mask, b_bits, b_mask, max_shift):
    """Lowest masked fractional Hamming distance over circular column shifts of ``b``.

    Returns ``(nan, 0)`` when no shift leaves a jointly valid cell.
    """
    a_mask = a_mask.astype(bool)
    best, best_shift = np.nan, 0
    for s in range(-max_shift, max_shift + 1):
        valid = a_mask & np.roll(b_mask, s, axis=1).astype(bool)
        n_valid = int(valid.sum())
        if n_valid == 0:
            continue
        diff = int((a_bits != np.roll(b_bits, s, axis=1))[valid].sum())
        hd = diff / (2.0 * n_valid)
        if np.isnan(best) or hd < best:
            best, best_shift = hd, s
    return best, best_shift

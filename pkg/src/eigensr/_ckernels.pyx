# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Mirrors ``_pykernels`` operation for operation."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def apply_weights(const double[:, ::1] src, const Py_ssize_t[:, ::1] idx,
                  const double[:, ::1] w):
    """Resample every row of ``src`` with per-output-sample taps."""
    cdef Py_ssize_t nrows = src.shape[0]
    cdef Py_ssize_t nout = idx.shape[0]
    cdef Py_ssize_t ntaps = idx.shape[1]
    cdef Py_ssize_t r, o, k
    cdef double acc
    out = np.empty((nrows, nout), dtype=np.float64)
    cdef double[:, ::1] res = out
    with nogil:
        for r in range(nrows):
            for o in range(nout):
                acc = 0.0
                for k in range(ntaps):
                    acc = acc + src[r, idx[o, k]] * w[o, k]
                res[r, o] = acc
    return out


def stitch_mean(const double[:, ::1] patches, const Py_ssize_t[::1] rows,
                const Py_ssize_t[::1] cols, Py_ssize_t patch_side, Py_ssize_t side):
    """Running per-pixel mean of overlapping square patches."""
    cdef Py_ssize_t n = patches.shape[0]
    cdef Py_ssize_t k, i, j, r0, c0
    cdef double v
    out = np.zeros((side, side), dtype=np.float64)
    cnt = np.zeros((side, side), dtype=np.float64)
    cdef double[:, ::1] acc = out
    cdef double[:, ::1] count = cnt
    with nogil:
        for k in range(n):
            r0 = rows[k]
            c0 = cols[k]
            for i in range(patch_side):
                for j in range(patch_side):
                    v = patches[k, i * patch_side + j]
                    count[r0 + i, c0 + j] = count[r0 + i, c0 + j] + 1.0
                    acc[r0 + i, c0 + j] = acc[r0 + i, c0 + j] + (
                        v - acc[r0 + i, c0 + j]) / count[r0 + i, c0 + j]
    return out, cnt


def min_shift_hamming(const cnp.uint8_t[:, :, ::1] a_bits, const cnp.uint8_t[:, ::1] a_mask,
                      const cnp.uint8_t[:, :, ::1] b_bits, const cnp.uint8_t[:, ::1] b_mask,
                      int max_shift):
    """Lowest masked fractional Hamming distance over circular column shifts of ``b``.

    Returns ``(nan, 0)`` when no shift leaves a jointly valid cell.
    """
    cdef Py_ssize_t nr = a_mask.shape[0]
    cdef Py_ssize_t nc = a_mask.shape[1]
    cdef Py_ssize_t i, j, jb
    cdef int s, best_shift = 0
    cdef long valid, diff
    cdef double hd, best = np.nan
    cdef bint found = False
    with nogil:
        for s in range(-max_shift, max_shift + 1):
            valid = 0
            diff = 0
            for i in range(nr):
                for j in range(nc):
                    jb = (j - s) % nc
                    if jb < 0:
                        jb = jb + nc
                    if a_mask[i, j] and b_mask[i, jb]:
                        valid += 1
                        diff += (a_bits[i, j, 0] != b_bits[i, jb, 0])
                        diff += (a_bits[i, j, 1] != b_bits[i, jb, 1])
            if valid > 0:
                hd = diff / (2.0 * valid)
                if not found or hd < best:
                    best = hd
                    best_shift = s
                    found = True
    return best, best_shift

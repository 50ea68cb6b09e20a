# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled exhaustive nearest-codeword scan.

Must stay exactly index- and cosine-equivalent to the numpy fallback in
kernels.py: same dot-product association order, strict > updates so ties
resolve to the lowest index. Built without FMA contraction (see setup.py).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def nearest_scan(cnp.float64_t[:, ::1] dirs, cnp.float64_t[:, ::1] codewords):
    """For each row of dirs, the argmax inner product over codewords.

    Returns (indices int64, cosines float64).
    """
    cdef Py_ssize_t n = dirs.shape[0]
    cdef Py_ssize_t m = codewords.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cos = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, j, best_j
    cdef double u0, u1, u2, u3, s, best
    for i in range(n):
        u0 = dirs[i, 0]
        u1 = dirs[i, 1]
        u2 = dirs[i, 2]
        u3 = dirs[i, 3]
        best = -2.0
        best_j = 0
        for j in range(m):
            s = (
                u0 * codewords[j, 0]
                + u1 * codewords[j, 1]
                + u2 * codewords[j, 2]
                + u3 * codewords[j, 3]
            )
            if s > best:
                best = s
                best_j = j
        idx[i] = best_j
        cos[i] = best
    return idx, cos

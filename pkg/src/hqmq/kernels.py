"""Nearest-codeword scan with a compiled core and a numpy fallback.

The exhaustive scan over all codewords is the hot inner loop of encoding
and of Monte-Carlo covering estimation. When the Cython extension built,
it is used automatically; set HQMQ_PURE_PYTHON=1 to force the fallback.
Both paths evaluate each 4-term dot product in the same left-to-right
order and break ties toward the lowest index, so their outputs are
bit-identical (benchmarks/bench_kernels.py compares their speed).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

COMPILED_AVAILABLE = _compiled is not None

# Rows per block in the fallback; bounds temporary memory at
# _BLOCK_ROWS * n_codewords doubles per product term.
_BLOCK_ROWS = 1024


def _force_python() -> bool:
    return os.environ.get("HQMQ_PURE_PYTHON", "") not in ("", "0")


def nearest_scan_py(dirs: np.ndarray, codewords: np.ndarray):
    """Blocked numpy scan; same contract as the compiled kernel."""
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    cw = np.ascontiguousarray(codewords, dtype=np.float64)
    n = dirs.shape[0]
    idx = np.empty(n, dtype=np.int64)
    cos = np.empty(n, dtype=np.float64)
    for lo in range(0, n, _BLOCK_ROWS):
        d = dirs[lo : lo + _BLOCK_ROWS]
        scores = (
            d[:, 0, None] * cw[:, 0]
            + d[:, 1, None] * cw[:, 1]
            + d[:, 2, None] * cw[:, 2]
            + d[:, 3, None] * cw[:, 3]
        )
        best = np.argmax(scores, axis=1)
        idx[lo : lo + _BLOCK_ROWS] = best
        cos[lo : lo + _BLOCK_ROWS] = scores[np.arange(d.shape[0]), best]
    return idx, cos


def nearest_scan(dirs: np.ndarray, codewords: np.ndarray):
    """(n, 4) directions x (m, 4) codewords -> (indices, cosines).

    Ties resolve to the lowest codeword index.
    """
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    cw = np.ascontiguousarray(codewords, dtype=np.float64)
    if _compiled is not None and not _force_python():
        return _compiled.nearest_scan(dirs, cw)
    return nearest_scan_py(dirs, cw)

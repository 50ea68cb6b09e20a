"""Quaternion primitives on arrays of shape (..., 4).

A quaternion w + x i + y j + z k is stored as the float64 array
[w, x, y, z]; all operations broadcast over leading axes.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateChunk, InvalidArgument
from .rng import RandomStream

UNIT_TOL = 1e-6


def hamilton(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b, broadcasting over leading axes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    w1, x1, y1, z1 = np.moveaxis(a, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def norm(q: np.ndarray) -> np.ndarray | float:
    """Euclidean norm over the last axis."""
    q = np.asarray(q, dtype=np.float64)
    out = np.sqrt((q * q).sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def normalize(q: np.ndarray) -> np.ndarray:
    """q / |q|; raises DegenerateChunk if any norm is zero."""
    q = np.asarray(q, dtype=np.float64)
    n = np.sqrt((q * q).sum(axis=-1))
    if np.any(n == 0.0):
        raise DegenerateChunk("cannot normalize a zero-norm quaternion")
    return q / n[..., None]


def _check_unit(q: np.ndarray, name: str) -> None:
    n = np.sqrt((np.asarray(q, dtype=np.float64) ** 2).sum(axis=-1))
    if np.any(np.abs(n - 1.0) > UNIT_TOL):
        raise InvalidArgument(f"{name} is not unit-norm within {UNIT_TOL}")


def angle(a: np.ndarray, b: np.ndarray) -> np.ndarray | float:
    """Geodesic angle acos(<a, b>) between unit quaternions, in radians.

    Antipodes are 180 degrees apart: a and -a are distinct codewords here,
    so no sign folding is applied.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_unit(a, "a")
    _check_unit(b, "b")
    dot = np.clip((a * b).sum(axis=-1), -1.0, 1.0)
    out = np.arccos(dot)
    return float(out) if out.ndim == 0 else out


def haar_quaternions(stream: RandomStream, n: int) -> np.ndarray:
    """n Haar-uniform unit quaternions: normalized 4-dim standard normals.

    A zero-norm draw (probability zero, but possible in principle) is
    replaced by further draws from the same stream, so the first n rows of a
    longer request always match a shorter one.
    """
    g = stream.gaussian(4 * n).reshape(n, 4)
    norms = np.sqrt((g * g).sum(axis=1))
    while True:
        bad = np.flatnonzero(norms == 0.0)
        if bad.size == 0:
            break
        g[bad] = stream.gaussian(4 * bad.size).reshape(-1, 4)
        norms[bad] = np.sqrt((g[bad] * g[bad]).sum(axis=1))
    return g / norms[:, None]


def haar_sample(stream: RandomStream) -> np.ndarray:
    """One Haar-uniform unit quaternion."""
    return haar_quaternions(stream, 1)[0]

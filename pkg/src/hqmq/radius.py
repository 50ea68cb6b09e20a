"""Uniform scalar quantization of chunk radii against a per-token scale.

The quantizer maps r in [0, sigma] to an integer quantum in
[0, 2^bits - 1] with round-half-away-from-zero and clamping; sigma is the
per-(token, head, role) maximum chunk norm, so the largest chunk of a token
always lands on the top level exactly and the absolute error is bounded by
sigma / (2 * (2^bits - 1)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

MIN_BITS = 1
MAX_BITS = 8


@dataclass(frozen=True)
class RadiusCode:
    quantum: int
    bits: int


def _check_bits(bits: int) -> None:
    if not MIN_BITS <= bits <= MAX_BITS:
        raise InvalidArgument(
            f"radius bits must be in [{MIN_BITS}, {MAX_BITS}], got {bits}"
        )


def quantize_radii(radii: np.ndarray, sigma: np.ndarray, bits: int) -> np.ndarray:
    """Vectorized quantizer; sigma broadcasts against radii. Returns uint8."""
    _check_bits(bits)
    radii = np.asarray(radii, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(radii < 0.0):
        raise InvalidArgument("radii must be nonnegative")
    if np.any(sigma <= 0.0):
        raise InvalidArgument("sigma must be positive")
    top = float(2**bits - 1)
    # floor(v + 0.5) is round-half-away-from-zero for v >= 0
    q = np.floor(radii * top / sigma + 0.5)
    return np.clip(q, 0.0, top).astype(np.uint8)


def dequantize_radii(quanta: np.ndarray, sigma: np.ndarray, bits: int) -> np.ndarray:
    _check_bits(bits)
    return np.asarray(quanta, dtype=np.float64) * np.asarray(
        sigma, dtype=np.float64
    ) / float(2**bits - 1)


def quantize_radius(r: float, sigma: float, bits: int) -> RadiusCode:
    """Quantize one radius; see quantize_radii for the conventions."""
    q = quantize_radii(np.float64(r), np.float64(sigma), bits)
    return RadiusCode(quantum=int(q), bits=bits)


def dequantize_radius(code: RadiusCode, sigma: float) -> float:
    if sigma <= 0.0:
        raise InvalidArgument("sigma must be positive")
    if not 0 <= code.quantum < 2**code.bits:
        raise InvalidArgument(
            f"quantum {code.quantum} out of range for {code.bits} bits"
        )
    return float(dequantize_radii(np.float64(code.quantum), np.float64(sigma), code.bits))


def token_scale(norms: np.ndarray) -> float:
    """Per-token scale: max chunk norm, or the sentinel 1.0 for a token
    whose chunks are all zero (its quanta are then all zero anyway)."""
    norms = np.asarray(norms, dtype=np.float64)
    if np.any(norms < 0.0):
        raise InvalidArgument("chunk norms must be nonnegative")
    top = float(norms.max()) if norms.size else 0.0
    return top if top > 0.0 else 1.0

"""Baseline quantizers: per-token integer rounding and additive 2-codebook VQ.

Both baselines share the tensor conventions of the main codec (shape,
chunking, per-token scales) so sweep comparisons differ only in the
quantizer itself.

naive int-B: per (token, head) symmetric max-abs scaling of raw elements,
q = round(x / scale * (2^(B-1) - 1)) with round-half-away-from-zero,
clamped to [-2^(B-1), 2^(B-1) - 1]. B bits per element plus the fp16 scale.

additive VQ: chunk directions approximated by normalize(c1[i] + c2[j]) for
two seeded codebooks of K unit quaternions each, searched exhaustively over
all K^2 pairs; radii ride the same per-token scalar path as the main codec.
ceil(2 log2 K) + radius bits per chunk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import CHUNK_DIM, _as_4d, _chunked, _outlier_flags
from .errors import InvalidArgument
from .kernels import nearest_scan
from .quat import haar_quaternions
from .radius import dequantize_radii, quantize_radii
from .rng import TAG_ADDITIVE_FIRST, TAG_ADDITIVE_SECOND, RandomStream

DEGENERATE_SUM_NORM = 1e-9


def naive_int_roundtrip(data: np.ndarray, bits: int) -> np.ndarray:
    """Round-trip the tensor through B-bit per-token integer quantization."""
    if not 2 <= bits <= 8:
        raise InvalidArgument(f"integer bits must be in [2, 8], got {bits}")
    data, _ = _as_4d(data)
    top = float(2 ** (bits - 1) - 1)
    scale = np.abs(data).max(axis=3, keepdims=True)
    scale = np.where(scale > 0.0, scale, 1.0).astype(np.float16).astype(np.float64)
    q = np.sign(data) * np.floor(np.abs(data) * top / scale + 0.5)
    q = np.clip(q, -(top + 1.0), top)
    return q * scale / top


def naive_int_with_extraction(
    data: np.ndarray,
    bits: int,
    outlier_multiplier: float,
    median_pooling: str = "batch",
) -> tuple[np.ndarray, float]:
    """naive int-B composed with median-relative chunk extraction.

    Outlier chunks are restored from float16 payloads; the max-abs scale is
    computed after their removal, mirroring the main codec's ordering.
    Returns (round-tripped tensor, extracted fraction).
    """
    if not 2 <= bits <= 8:
        raise InvalidArgument(f"integer bits must be in [2, 8], got {bits}")
    data, shape = _as_4d(data)
    chunks = _chunked(data, shape)
    norms = np.sqrt((chunks * chunks).sum(axis=4))
    flags = _outlier_flags(norms, outlier_multiplier, median_pooling)
    payloads = chunks[flags].astype(np.float16)

    kept = np.where(flags[..., None], 0.0, chunks)
    top = float(2 ** (bits - 1) - 1)
    scale = np.abs(kept).max(axis=(3, 4), keepdims=True)
    scale = np.where(scale > 0.0, scale, 1.0).astype(np.float16).astype(np.float64)
    q = np.sign(kept) * np.floor(np.abs(kept) * top / scale + 0.5)
    q = np.clip(q, -(top + 1.0), top)
    out = q * scale / top
    out[flags] = payloads.astype(np.float64)
    out = out.reshape(shape.batch, shape.heads, shape.tokens, shape.padded_dim)
    return out[..., : shape.head_dim], float(flags.mean()) if flags.size else 0.0


@dataclass(frozen=True)
class AdditiveCodebookPair:
    """Two seeded codebooks whose pairwise sums span the direction set."""

    first: np.ndarray
    second: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return self.first.shape[0]


def build_additive_pair(size: int, seed: int) -> AdditiveCodebookPair:
    if size < 1:
        raise InvalidArgument(f"codebook size must be >= 1, got {size}")
    first = haar_quaternions(RandomStream(TAG_ADDITIVE_FIRST, seed), size)
    second = haar_quaternions(RandomStream(TAG_ADDITIVE_SECOND, seed), size)
    return AdditiveCodebookPair(first=first, second=second, seed=seed)


def additive_candidates(pair: AdditiveCodebookPair):
    """Normalized pair sums and their (i, j) labels.

    Near-zero sums (opposed entries) cannot be normalized and are skipped;
    their pair indices are simply never produced by the search.
    """
    sums = (pair.first[:, None, :] + pair.second[None, :, :]).reshape(-1, CHUNK_DIM)
    norms = np.sqrt((sums * sums).sum(axis=1))
    valid = np.flatnonzero(norms > DEGENERATE_SUM_NORM)
    if valid.size == 0:
        raise InvalidArgument("all codebook pair sums are degenerate")
    return sums[valid] / norms[valid][:, None], valid


def additive_nearest(
    dirs: np.ndarray, pair: AdditiveCodebookPair
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exhaustive K^2 search; returns (first idx, second idx, cosines)."""
    candidates, valid = additive_candidates(pair)
    rows, cos = nearest_scan(dirs, candidates)
    flat = valid[rows]
    return flat // pair.size, flat % pair.size, cos


def additive_bits_per_chunk(size: int, radius_bits: int, ceiled: bool = True) -> float:
    two_log = 2.0 * math.log2(size) if size > 1 else 0.0
    return (math.ceil(two_log) if ceiled else two_log) + radius_bits


def additive_vq_roundtrip(
    data: np.ndarray, size: int, radius_bits: int, seed: int = 0
) -> np.ndarray:
    """Round-trip the tensor through additive VQ directions.

    Radii reuse the main codec's per-token scalar path (max chunk norm,
    float16 scale, round-half-away-from-zero quanta).
    """
    data, shape = _as_4d(data)
    pair = build_additive_pair(size, seed)
    candidates, valid = additive_candidates(pair)

    chunks = _chunked(data, shape)
    norms = np.sqrt((chunks * chunks).sum(axis=4))
    sigma = norms.max(axis=3)
    sigma = np.where(sigma > 0.0, sigma, 1.0)
    sigma_wide = sigma.astype(np.float16).astype(np.float64)
    quanta = quantize_radii(norms, sigma_wide[..., None], radius_bits)
    radii = dequantize_radii(quanta, sigma_wide[..., None], radius_bits)

    live = norms > 0.0
    decoded = np.zeros_like(chunks)
    if live.any():
        dirs = chunks[live] / norms[live][:, None]
        rows, _ = nearest_scan(dirs, candidates)
        decoded[live] = radii[live][:, None] * candidates[rows]
    out = decoded.reshape(shape.batch, shape.heads, shape.tokens, shape.padded_dim)
    return out[..., : shape.head_dim]

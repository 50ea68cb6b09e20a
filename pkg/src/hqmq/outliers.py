"""Median-relative outlier extraction and its bit-cost accounting.

A chunk whose norm exceeds multiplier * median(chunk norms) is stored as a
raw half-precision 4-tuple instead of a quantized code, flagged by one bit
per chunk. The median is the lower median of the pooled batch, pooled by
default across heads and tokens of one (layer, role) call so a single hot
head cannot mask its own outliers.

With extraction fraction p, the average cost per element is

    (1 - p) * base_bits + p * 16 + 1 / chunk_dim

where the trailing term is the always-present flag bit amortized over the
chunk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

CHUNK_DIM = 4
PAYLOAD_BITS = 16  # per element of an extracted chunk


@dataclass(frozen=True)
class OutlierPolicy:
    """Extraction threshold as a multiple of the pooled median norm."""

    multiplier: float = 3.0

    def __post_init__(self):
        if not self.multiplier > 0.0:
            raise InvalidArgument(
                f"outlier multiplier must be positive, got {self.multiplier}"
            )


@dataclass
class ExtractionResult:
    flags: np.ndarray
    payloads: np.ndarray
    median_norm: float
    fraction: float


def lower_median(values: np.ndarray) -> float:
    """Element at index (n - 1) // 2 of the sorted values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise InvalidArgument("cannot take the median of an empty array")
    return float(np.partition(values.ravel(), (values.size - 1) // 2)[(values.size - 1) // 2])


def extract(chunks: np.ndarray, policy: OutlierPolicy) -> ExtractionResult:
    """Flag chunks with norm strictly above multiplier * lower median.

    chunks has shape (n, 4); payloads are the flagged rows narrowed to
    float16, in scan order.
    """
    chunks = np.asarray(chunks, dtype=np.float64)
    if chunks.ndim != 2 or chunks.shape[1] != CHUNK_DIM:
        raise InvalidArgument(f"chunks must have shape (n, {CHUNK_DIM})")
    norms = np.sqrt((chunks * chunks).sum(axis=1))
    med = lower_median(norms)
    flags = norms > policy.multiplier * med
    return ExtractionResult(
        flags=flags,
        payloads=chunks[flags].astype(np.float16),
        median_norm=med,
        fraction=float(flags.mean()) if flags.size else 0.0,
    )


def effective_bits(
    base_bits: float, fraction: float, chunk_dim: int = CHUNK_DIM
) -> float:
    """Average bits per element after extracting a fraction of chunks."""
    if not 0.0 <= fraction <= 1.0:
        raise InvalidArgument(f"fraction must be in [0, 1], got {fraction}")
    if base_bits < 0.0:
        raise InvalidArgument("base_bits must be nonnegative")
    return (1.0 - fraction) * base_bits + fraction * PAYLOAD_BITS + 1.0 / chunk_dim

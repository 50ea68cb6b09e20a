"""Bit accounting: storage cost per chunk and per element, cache sizing.

A chunk costs the codeword index plus the radius quantum; a token
additionally stores one 16-bit scale amortized over head_dim elements.
"fractional" mode charges log2(24 * size) bits for the index (the
entropy-optimal packing of the index space); "ceiled" charges the integer
ceil(log2(24 * size)) actually used by the serialized stream. When head_dim
is not a multiple of 4, the padded tail chunks are real storage, so the
per-element rate carries the factor padded_dim / head_dim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .codebook import effective_size
from .codec import CHUNK_DIM
from .errors import InvalidArgument

FP16_BITS = 16.0

BUDGET_MODES = ("fractional", "ceiled")


@dataclass(frozen=True)
class BitBudget:
    codebook_size: int
    radius_bits: int
    head_dim: int
    mode: str
    index_bits: float
    per_chunk: float
    per_element: float
    per_element_with_scale: float

    @property
    def compression_ratio(self) -> float:
        """fp16 storage divided by quantized storage, scale included."""
        return FP16_BITS / self.per_element_with_scale


def budget(
    codebook_size: int,
    radius_bits: int,
    head_dim: int = 128,
    mode: str = "fractional",
) -> BitBudget:
    if codebook_size < 1 or radius_bits < 1:
        raise InvalidArgument("codebook size and radius bits must be >= 1")
    if head_dim < 1:
        raise InvalidArgument("head_dim must be >= 1")
    if mode not in BUDGET_MODES:
        raise InvalidArgument(f"mode must be one of {BUDGET_MODES}")

    n_codewords = effective_size(codebook_size)
    if mode == "fractional":
        index_bits = math.log2(n_codewords)
    else:
        index_bits = float((n_codewords - 1).bit_length())
    per_chunk = index_bits + radius_bits
    chunks = -(-head_dim // CHUNK_DIM)
    per_element = per_chunk * chunks / head_dim
    return BitBudget(
        codebook_size=codebook_size,
        radius_bits=radius_bits,
        head_dim=head_dim,
        mode=mode,
        index_bits=index_bits,
        per_chunk=per_chunk,
        per_element=per_element,
        per_element_with_scale=per_element + FP16_BITS / head_dim,
    )


def cache_size_bytes(
    layers: int,
    kv_heads: int,
    head_dim: int,
    tokens: int,
    bits_per_element: float | BitBudget,
) -> float:
    """KV-cache bytes for a model: K and V, all layers, all kv heads.

    bits_per_element may be a BitBudget (its with-scale rate is used) or a
    plain rate such as 16.0 for the fp16 reference.
    """
    if isinstance(bits_per_element, BitBudget):
        bits_per_element = bits_per_element.per_element_with_scale
    if min(layers, kv_heads, head_dim, tokens) < 1:
        raise InvalidArgument("model dimensions must be positive")
    if bits_per_element <= 0:
        raise InvalidArgument("bits per element must be positive")
    elements = 2 * layers * kv_heads * head_dim * tokens
    return elements * bits_per_element / 8.0

"""Scaled dot-product attention over quantized K/V, decoded tile by tile.

reference_attend is the plain two-pass oracle on dense float64 tensors.
fused_attend consumes QuantizedTensor K/V directly: each KV tile is decoded
inside the loop (the dense K/V never exist in full) and folded into the
running online-softmax state (row max m, exponential sum l, weighted
accumulator o). Up to floating-point reassociation the two paths agree for
every tile size.

Grouped queries: query head h reads kv head h // (query_heads // kv_heads).
Causal masking: query i may see key j iff j <= i + (kv_tokens -
query_tokens), i.e. the query block is aligned to the end of the key block,
the decode-time layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import CodebookBank
from .codec import QuantizedTensor, decode_token_range
from .errors import ConfigMismatch, InvalidArgument

DEFAULT_TILE = 32


@dataclass(frozen=True)
class AttentionConfig:
    batch: int
    query_heads: int
    kv_heads: int
    query_tokens: int
    kv_tokens: int
    head_dim: int
    causal: bool = True
    scale: float | None = None

    def __post_init__(self):
        if min(
            self.batch,
            self.query_heads,
            self.kv_heads,
            self.query_tokens,
            self.kv_tokens,
            self.head_dim,
        ) < 1:
            raise InvalidArgument("all attention dimensions must be positive")
        if self.query_heads % self.kv_heads != 0:
            raise InvalidArgument(
                f"query heads {self.query_heads} not a multiple of kv heads {self.kv_heads}"
            )
        if self.causal and self.query_tokens > self.kv_tokens:
            raise InvalidArgument(
                "causal attention requires query_tokens <= kv_tokens"
            )

    @property
    def group_size(self) -> int:
        return self.query_heads // self.kv_heads

    @property
    def logit_scale(self) -> float:
        return self.scale if self.scale is not None else self.head_dim**-0.5

    @property
    def causal_offset(self) -> int:
        return self.kv_tokens - self.query_tokens


def _check_query(q: np.ndarray, cfg: AttentionConfig) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    expected = (cfg.batch, cfg.query_heads, cfg.query_tokens, cfg.head_dim)
    if q.shape != expected:
        raise InvalidArgument(f"query shape {q.shape} != {expected}")
    return q


def reference_attend(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, cfg: AttentionConfig
) -> np.ndarray:
    """Dense two-pass softmax attention, float64 throughout."""
    q = _check_query(q, cfg)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    expected = (cfg.batch, cfg.kv_heads, cfg.kv_tokens, cfg.head_dim)
    if k.shape != expected or v.shape != expected:
        raise InvalidArgument(f"k/v shape must be {expected}")

    g = cfg.group_size
    qg = q.reshape(cfg.batch, cfg.kv_heads, g, cfg.query_tokens, cfg.head_dim)
    logits = np.einsum("bhgid,bhjd->bhgij", qg, k) * cfg.logit_scale
    if cfg.causal:
        i = np.arange(cfg.query_tokens)[:, None]
        j = np.arange(cfg.kv_tokens)[None, :]
        logits = np.where(j <= i + cfg.causal_offset, logits, -np.inf)
    m = logits.max(axis=-1, keepdims=True)
    p = np.exp(logits - m)
    out = np.einsum("bhgij,bhjd->bhgid", p, v) / p.sum(axis=-1, keepdims=True)
    return out.reshape(cfg.batch, cfg.query_heads, cfg.query_tokens, cfg.head_dim)


def _check_packed(
    packed_k: QuantizedTensor,
    packed_v: QuantizedTensor,
    bank: CodebookBank,
    cfg: AttentionConfig,
) -> None:
    if packed_k.role != "K" or packed_v.role != "V":
        raise ConfigMismatch(
            f"expected roles K/V, got {packed_k.role}/{packed_v.role}"
        )
    if packed_k.config != packed_v.config:
        raise ConfigMismatch("K and V codec configs differ")
    if packed_k.layer != packed_v.layer:
        raise ConfigMismatch("K and V layers differ")
    if packed_k.head_base != packed_v.head_base:
        raise ConfigMismatch("K and V head bases differ")
    cc = packed_k.config
    if bank.seed != cc.seed or bank.size != cc.codebook_size:
        raise ConfigMismatch("codebook bank does not match the packed config")
    if packed_k.shape != packed_v.shape:
        raise ConfigMismatch("K and V shapes differ")
    s = packed_k.shape
    if (s.batch, s.heads, s.tokens, s.head_dim) != (
        cfg.batch,
        cfg.kv_heads,
        cfg.kv_tokens,
        cfg.head_dim,
    ):
        raise InvalidArgument("packed K/V shape does not match the attention config")
    if cfg.head_dim % 4 != 0:
        raise InvalidArgument("fused attention requires head_dim % 4 == 0")


def fused_attend(
    q: np.ndarray,
    packed_k: QuantizedTensor,
    packed_v: QuantizedTensor,
    bank: CodebookBank,
    cfg: AttentionConfig,
    tile: int = DEFAULT_TILE,
    dtype=np.float64,
) -> np.ndarray:
    """Online-softmax attention with per-tile K/V decode.

    dtype float32 exercises the reduced-precision accumulation path; the
    decode itself happens in float64 and is narrowed per tile.
    """
    if tile < 1:
        raise InvalidArgument("tile size must be >= 1")
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise InvalidArgument("dtype must be float64 or float32")
    q = _check_query(q, cfg)
    _check_packed(packed_k, packed_v, bank, cfg)

    g = cfg.group_size
    qg = q.reshape(
        cfg.batch, cfg.kv_heads, g, cfg.query_tokens, cfg.head_dim
    ).astype(dtype)
    scale = dtype.type(cfg.logit_scale)

    state_shape = (cfg.batch, cfg.kv_heads, g, cfg.query_tokens)
    m = np.full(state_shape, -np.inf, dtype=dtype)
    l = np.zeros(state_shape, dtype=dtype)
    o = np.zeros(state_shape + (cfg.head_dim,), dtype=dtype)
    rows = np.arange(cfg.query_tokens)[:, None]

    for start in range(0, cfg.kv_tokens, tile):
        stop = min(start + tile, cfg.kv_tokens)
        k_tile = decode_token_range(packed_k, bank, start, stop).astype(dtype)
        v_tile = decode_token_range(packed_v, bank, start, stop).astype(dtype)

        s = np.einsum("bhgid,bhjd->bhgij", qg, k_tile) * scale
        if cfg.causal:
            cols = np.arange(start, stop)[None, :]
            s = np.where(cols <= rows + cfg.causal_offset, s, -np.inf)

        tile_max = s.max(axis=-1)
        m_new = np.maximum(m, tile_max)
        # A row that has seen nothing yet keeps m = -inf; carry its empty
        # state through unchanged instead of evaluating exp(-inf - -inf).
        seen = m_new > -np.inf
        shift = np.where(seen, m_new, 0.0)
        alpha = np.where(m > -np.inf, np.exp(m - shift), 0.0)
        p = np.exp(s - shift[..., None])
        p[~np.isfinite(s)] = 0.0
        l = l * alpha + p.sum(axis=-1)
        o = o * alpha[..., None] + np.einsum("bhgij,bhjd->bhgid", p, v_tile)
        m = m_new

    if np.any(l == 0.0):
        raise InvalidArgument("some query rows attend to no keys")
    out = o / l[..., None]
    return out.reshape(cfg.batch, cfg.query_heads, cfg.query_tokens, cfg.head_dim).astype(
        dtype
    )

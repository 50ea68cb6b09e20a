"""End-to-end encode and decode for KV-cache-shaped tensors.

A tensor of shape (batch, heads, tokens, head_dim) is split per head vector
into 4-element chunks (zero-padded when head_dim is not a multiple of 4).
Each chunk x is factored as radius times direction: the radius is scalar
quantized against the per-token scale (radius.py) and the direction is
matched against the joint codebook of the chunk's (layer, head, role)
(codebook.py). Chunks flagged as outliers bypass both paths and ride along
as half-precision payloads (outliers.py).

Key conventions, all load-bearing for the serialized format:

- The per-token scale is the max chunk norm of the token, computed after
  outlier removal when extraction is enabled, then narrowed to float16
  (round-to-nearest-even) so in-memory decode matches decode-after-
  serialization bit for bit. All-zero tokens store the sentinel scale 1.0.
- A zero-norm chunk encodes as codeword index 0 with radius quantum 0; it
  decodes to the zero chunk, so no direction is invented for it.
- Codes and payloads are kept in tensor scan order, row-major over
  (batch, head, token, chunk).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import CodebookBank, JointCodebook, effective_size
from .errors import CorruptData, InvalidArgument
from .kernels import nearest_scan
from .outliers import OutlierPolicy, lower_median
from .radius import (
    MAX_BITS,
    MIN_BITS,
    RadiusCode,
    dequantize_radii,
    dequantize_radius,
    quantize_radii,
    quantize_radius,
)
from .rng import ROLE_TAGS

CHUNK_DIM = 4

MEDIAN_POOLING_MODES = ("batch", "per_head")


@dataclass(frozen=True)
class TensorShape:
    batch: int
    heads: int
    tokens: int
    head_dim: int

    def __post_init__(self):
        if self.batch < 1 or self.heads < 1 or self.head_dim < 1:
            raise InvalidArgument(f"degenerate tensor shape {self}")
        if self.tokens < 0:
            raise InvalidArgument("token count must be nonnegative")

    @property
    def chunks_per_vector(self) -> int:
        return -(-self.head_dim // CHUNK_DIM)

    @property
    def padded_dim(self) -> int:
        return self.chunks_per_vector * CHUNK_DIM

    @property
    def elements(self) -> int:
        return self.batch * self.heads * self.tokens * self.head_dim


@dataclass(frozen=True)
class CodecConfig:
    """Quantizer settings: codebook size, radius bits, seed, outlier policy.

    outlier_multiplier None disables extraction entirely (no flag bitmap is
    accounted or stored). median_pooling "batch" pools the outlier median
    across heads and tokens of the call; "per_head" computes it per head.
    """

    codebook_size: int
    radius_bits: int
    seed: int = 0
    outlier_multiplier: float | None = None
    median_pooling: str = "batch"

    def __post_init__(self):
        if self.codebook_size < 1:
            raise InvalidArgument("codebook size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgument("seed must fit in an unsigned 64-bit word")
        if not MIN_BITS <= self.radius_bits <= MAX_BITS:
            raise InvalidArgument(
                f"radius bits must be in [{MIN_BITS}, {MAX_BITS}]"
            )
        if self.outlier_multiplier is not None and not self.outlier_multiplier > 0:
            raise InvalidArgument("outlier multiplier must be positive")
        if self.median_pooling not in MEDIAN_POOLING_MODES:
            raise InvalidArgument(
                f"median pooling must be one of {MEDIAN_POOLING_MODES}"
            )

    @property
    def index_count(self) -> int:
        return effective_size(self.codebook_size)

    @property
    def index_bits(self) -> int:
        """Ceiled bits for one codeword index."""
        return (self.index_count - 1).bit_length()


@dataclass(frozen=True)
class ChunkCode:
    """One quantized chunk: flat codeword index plus radius code."""

    index: int
    radius: RadiusCode


@dataclass
class QuantizedTensor:
    """Quantized form of one (layer, role) tensor across its heads.

    indices/quanta/flags have shape (batch, heads, tokens, chunks); entries
    at flagged positions are zero and carry no information (the flags array
    is authoritative). payloads holds the flagged chunks as float16 rows in
    scan order. scales is the float16 per-token scale array.

    head_base anchors codebook keying: tensor head i uses the codebook of
    head head_base + i, so a single-head slice of a model can be packed as
    its own (layer, head, role) file without losing its codebook identity.
    """

    shape: TensorShape
    config: CodecConfig
    layer: int
    role: str
    scales: np.ndarray
    indices: np.ndarray
    quanta: np.ndarray
    flags: np.ndarray
    payloads: np.ndarray
    head_base: int = 0

    @property
    def outlier_fraction(self) -> float:
        return float(self.flags.mean()) if self.flags.size else 0.0


def chunk_vector(vec: np.ndarray) -> np.ndarray:
    """Split one head vector into (chunks, 4), zero-padding the tail."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1 or vec.size < 1:
        raise InvalidArgument("expected a nonempty 1-d vector")
    pad = (-vec.size) % CHUNK_DIM
    if pad:
        vec = np.concatenate([vec, np.zeros(pad)])
    return vec.reshape(-1, CHUNK_DIM)


def encode_chunk(
    x: np.ndarray, joint: JointCodebook, sigma: float, radius_bits: int
) -> ChunkCode:
    """Quantize one chunk against an already-chosen token scale."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (CHUNK_DIM,):
        raise InvalidArgument(f"chunk must have shape ({CHUNK_DIM},)")
    r = float(np.sqrt((x * x).sum()))
    if r == 0.0:
        return ChunkCode(index=0, radius=RadiusCode(quantum=0, bits=radius_bits))
    flat, _ = nearest_scan((x / r)[None, :], joint.codewords)
    return ChunkCode(index=int(flat[0]), radius=quantize_radius(r, sigma, radius_bits))


def decode_chunk(code: ChunkCode, joint: JointCodebook, sigma: float) -> np.ndarray:
    n_codewords = joint.codewords.shape[0]
    if not 0 <= code.index < n_codewords:
        raise CorruptData(
            f"codeword index {code.index} out of range for {n_codewords} codewords"
        )
    return dequantize_radius(code.radius, sigma) * joint.codewords[code.index]


def _as_4d(data: np.ndarray) -> tuple[np.ndarray, TensorShape]:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 4:
        raise InvalidArgument(
            f"expected (batch, heads, tokens, head_dim) data, got ndim={data.ndim}"
        )
    return data, TensorShape(*data.shape)


def _chunked(data: np.ndarray, shape: TensorShape) -> np.ndarray:
    pad = shape.padded_dim - shape.head_dim
    if pad:
        data = np.concatenate(
            [data, np.zeros(data.shape[:3] + (pad,))], axis=3
        )
    return data.reshape(
        shape.batch, shape.heads, shape.tokens, shape.chunks_per_vector, CHUNK_DIM
    )


def _outlier_flags(
    norms: np.ndarray, multiplier: float | None, pooling: str
) -> np.ndarray:
    """Threshold chunk norms at multiplier times the pooled lower median."""
    if multiplier is None or norms.size == 0:
        return np.zeros(norms.shape, dtype=bool)
    if pooling == "batch":
        return norms > multiplier * lower_median(norms)
    flags = np.zeros(norms.shape, dtype=bool)
    for h in range(norms.shape[1]):
        flags[:, h] = norms[:, h] > multiplier * lower_median(norms[:, h])
    return flags


def _bank_for(config: CodecConfig, bank: CodebookBank | None) -> CodebookBank:
    if bank is None:
        return CodebookBank(seed=config.seed, size=config.codebook_size)
    if bank.seed != config.seed or bank.size != config.codebook_size:
        raise InvalidArgument(
            "codebook bank does not match the codec config (seed or size)"
        )
    return bank


def encode_tensor(
    data: np.ndarray,
    config: CodecConfig,
    layer: int = 0,
    role: str = "K",
    bank: CodebookBank | None = None,
    head_base: int = 0,
) -> QuantizedTensor:
    """Quantize a (batch, heads, tokens, head_dim) tensor.

    Deterministic: identical (data, config, layer, role, head_base) always
    produce an identical QuantizedTensor.
    """
    if role not in ROLE_TAGS:
        raise InvalidArgument(f"role must be one of {sorted(ROLE_TAGS)}")
    if head_base < 0:
        raise InvalidArgument("head_base must be nonnegative")
    data, shape = _as_4d(data)
    bank = _bank_for(config, bank)
    chunks = _chunked(data, shape)
    norms = np.sqrt((chunks * chunks).sum(axis=4))

    flags = _outlier_flags(norms, config.outlier_multiplier, config.median_pooling)
    payloads = chunks[flags].astype(np.float16)

    kept = np.where(flags, 0.0, norms)
    sigma = kept.max(axis=3) if shape.tokens else np.zeros(norms.shape[:3])
    sigma = np.where(sigma > 0.0, sigma, 1.0)
    scales = sigma.astype(np.float16)
    sigma_wide = scales.astype(np.float64)

    quanta = quantize_radii(kept, sigma_wide[..., None], config.radius_bits)
    quanta[flags] = 0

    indices = np.zeros(norms.shape, dtype=np.int32)
    live = ~flags & (norms > 0.0)
    for h in range(shape.heads):
        sel = live[:, h]
        if not sel.any():
            continue
        dirs = chunks[:, h][sel] / norms[:, h][sel][:, None]
        flat, _ = nearest_scan(dirs, bank.joint(layer, head_base + h, role).codewords)
        indices[:, h][sel] = flat.astype(np.int32)

    return QuantizedTensor(
        shape=shape,
        config=config,
        layer=layer,
        role=role,
        scales=scales,
        indices=indices,
        quanta=quanta,
        flags=flags,
        payloads=payloads,
        head_base=head_base,
    )


def decode_token_range(
    packed: QuantizedTensor,
    bank: CodebookBank,
    start: int,
    stop: int,
) -> np.ndarray:
    """Decode tokens [start, stop) to a dense float64 array.

    This is the tile primitive of the fused attention path; full decode is
    the special case of one tile. Flagged chunks come back from their
    payloads, everything else from codeword times dequantized radius.
    """
    shape = packed.shape
    if not 0 <= start <= stop <= shape.tokens:
        raise InvalidArgument(f"token range [{start}, {stop}) out of bounds")
    n_codewords = packed.config.index_count
    if packed.indices.size and (
        packed.indices.min() < 0 or packed.indices.max() >= n_codewords
    ):
        raise CorruptData("codeword index out of range")

    idx = packed.indices[:, :, start:stop]
    quanta = packed.quanta[:, :, start:stop]
    flags = packed.flags[:, :, start:stop]
    sigma = packed.scales[:, :, start:stop].astype(np.float64)
    radii = dequantize_radii(quanta, sigma[..., None], packed.config.radius_bits)

    chunks = np.empty(idx.shape + (CHUNK_DIM,), dtype=np.float64)
    for h in range(shape.heads):
        table = bank.joint(packed.layer, packed.head_base + h, packed.role).codewords
        chunks[:, h] = radii[:, h][..., None] * table[idx[:, h]]

    if flags.any():
        payload_pos = np.cumsum(packed.flags.ravel()) - 1
        window = payload_pos.reshape(packed.flags.shape)[:, :, start:stop][flags]
        chunks[flags] = packed.payloads[window].astype(np.float64)

    flat = chunks.reshape(shape.batch, shape.heads, stop - start, shape.padded_dim)
    return flat[..., : shape.head_dim]


def decode_tensor(
    packed: QuantizedTensor, bank: CodebookBank | None = None
) -> np.ndarray:
    """Reconstruct the full (batch, heads, tokens, head_dim) tensor."""
    bank = _bank_for(packed.config, bank)
    return decode_token_range(packed, bank, 0, packed.shape.tokens)


def quantize_dequantize(
    data: np.ndarray,
    config: CodecConfig,
    layer: int = 0,
    role: str = "K",
    bank: CodebookBank | None = None,
    head_base: int = 0,
) -> np.ndarray:
    """Fake-quant round trip used by benchmarks and quality sweeps."""
    bank = _bank_for(config, bank)
    return decode_tensor(encode_tensor(data, config, layer, role, bank, head_base), bank)

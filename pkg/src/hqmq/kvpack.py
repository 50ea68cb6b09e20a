"""The kvpack container for quantized tensors, and a raw tensor format.

Everything is little-endian; bit streams fill bytes LSB-first; every
section starts on a byte boundary. One file holds one QuantizedTensor (one
layer and role, all of its heads).

Layout of version 1:

    offset size
    0      4    magic "HQMQ"
    4      2    format version (u16) = 1
    6      2    flags (u16): bit 0 outlier extraction enabled,
                bit 1 per-head median pooling
    8      16   batch, heads, tokens, head_dim (u32 each; head_dim is the
                original, pre-padding width)
    24     4    secondary codebook size (u32)
    28     1    radius bits (u8)
    29     1    role (u8): 0x4B 'K' or 0x56 'V'
    30     2    head_base (u16): codebook head index of tensor head 0
    32     8    codebook seed (u64)
    40     4    outlier multiplier, Q16.16 fixed point (u32; 0 if disabled)
    44     4    layer (u32)
    48     80   section table: 5 x (absolute offset u64, byte length u64)
                for scales, indices, radii, flags, payloads
    128         sections, in table order, each byte-aligned
    end    4    CRC-32 (u32) over every preceding byte

Sections: scales are float16 per (batch, head, token). Indices and radii
cover only unflagged chunks, in tensor scan order, packed at
ceil(log2(24 * size)) and radius-bits wide respectively. The flag bitmap
covers every chunk (1 bit each) and is present exactly when extraction is
enabled, even if no chunk tripped it. Payloads are float16 4-tuples for
flagged chunks, in scan order.

The writer is canonical (equal tensors serialize to equal bytes), so a
read-write round trip is byte-identical and fixed seeds give reproducible
files.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .codec import CHUNK_DIM, CodecConfig, QuantizedTensor, TensorShape
from .errors import CorruptData, InvalidArgument, UnsupportedVersion
from .rng import ROLE_TAGS

MAGIC = b"HQMQ"
VERSION = 1
HEADER_BYTES = 128
_HEADER_FMT = "<4sHHIIIIIBBHQII"
_SECTION_COUNT = 5

_FLAG_OUTLIER = 1
_FLAG_PER_HEAD = 2

RAW_MAGIC = b"KVRW"
_RAW_FMT = "<4sBIIII"
_RAW_DTYPES = {0: np.float32, 1: np.float16}


def _pack_uint_stream(values: np.ndarray, width: int) -> bytes:
    """Pack unsigned integers at a fixed bit width, LSB-first."""
    if not 1 <= width <= 32:
        raise InvalidArgument(f"bit width must be in [1, 32], got {width}")
    values = np.asarray(values, dtype=np.uint64).ravel()
    if values.size == 0:
        return b""
    if int(values.max()) >> width:
        raise InvalidArgument(f"value does not fit in {width} bits")
    bits = ((values[:, None] >> np.arange(width, dtype=np.uint64)) & 1).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def _unpack_uint_stream(buf: bytes, width: int, count: int) -> np.ndarray:
    if count == 0:
        return np.empty(0, dtype=np.int64)
    need = (count * width + 7) // 8
    if len(buf) != need:
        raise CorruptData(f"bit stream length {len(buf)} != expected {need}")
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")
    bits = bits[: count * width].reshape(count, width).astype(np.int64)
    return (bits << np.arange(width, dtype=np.int64)).sum(axis=1)


def _multiplier_to_fixed(multiplier: float | None) -> int:
    if multiplier is None:
        return 0
    fixed = int(round(multiplier * 65536.0))
    if not 0 < fixed <= 0xFFFFFFFF:
        raise InvalidArgument(f"outlier multiplier {multiplier} not representable")
    return fixed


def expected_file_size(packed: QuantizedTensor) -> int:
    """Exact byte size write_kvpack will produce for this tensor."""
    shape = packed.shape
    n_chunks = shape.batch * shape.heads * shape.tokens * shape.chunks_per_vector
    n_coded = n_chunks - int(packed.flags.sum())
    width = packed.config.index_bits
    size = HEADER_BYTES
    size += 2 * shape.batch * shape.heads * shape.tokens
    size += (n_coded * width + 7) // 8
    size += (n_coded * packed.config.radius_bits + 7) // 8
    if packed.config.outlier_multiplier is not None:
        size += (n_chunks + 7) // 8
    size += 8 * packed.payloads.shape[0]
    return size + 4


def write_kvpack(packed: QuantizedTensor, sink) -> int:
    """Serialize to a path or binary file object; returns bytes written."""
    blob = to_bytes(packed)
    if hasattr(sink, "write"):
        sink.write(blob)
    else:
        with open(sink, "wb") as f:
            f.write(blob)
    return len(blob)


def to_bytes(packed: QuantizedTensor) -> bytes:
    shape = packed.shape
    config = packed.config
    if packed.role not in ROLE_TAGS:
        raise InvalidArgument(f"role must be one of {sorted(ROLE_TAGS)}")

    if not 0 <= packed.head_base + shape.heads <= 0xFFFF:
        raise InvalidArgument("head_base + heads must fit in 16 bits")
    coded = ~packed.flags
    scales = np.ascontiguousarray(packed.scales, dtype=np.float16)
    sections = [
        scales.tobytes(),
        _pack_uint_stream(packed.indices[coded], config.index_bits),
        _pack_uint_stream(packed.quanta[coded], config.radius_bits),
        (
            np.packbits(packed.flags.ravel().astype(np.uint8), bitorder="little").tobytes()
            if config.outlier_multiplier is not None
            else b""
        ),
        np.ascontiguousarray(packed.payloads, dtype=np.float16).tobytes(),
    ]

    flags = 0
    if config.outlier_multiplier is not None:
        flags |= _FLAG_OUTLIER
    if config.median_pooling == "per_head":
        flags |= _FLAG_PER_HEAD

    header = struct.pack(
        _HEADER_FMT,
        MAGIC,
        VERSION,
        flags,
        shape.batch,
        shape.heads,
        shape.tokens,
        shape.head_dim,
        config.codebook_size,
        config.radius_bits,
        ROLE_TAGS[packed.role],
        packed.head_base,
        config.seed,
        _multiplier_to_fixed(config.outlier_multiplier),
        packed.layer,
    )
    table = bytearray()
    offset = HEADER_BYTES
    for body in sections:
        table += struct.pack("<QQ", offset, len(body))
        offset += len(body)
    payload = header + bytes(table) + b"".join(sections)
    return payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


def read_kvpack(source) -> QuantizedTensor:
    """Parse a kvpack file back into a QuantizedTensor.

    Raises CorruptData on any checksum, bounds, or length violation and
    UnsupportedVersion on a version this build does not know.
    """
    if hasattr(source, "read"):
        blob = source.read()
    else:
        with open(source, "rb") as f:
            blob = f.read()
    return from_bytes(blob)


def from_bytes(blob: bytes) -> QuantizedTensor:
    if len(blob) < HEADER_BYTES + 4:
        raise CorruptData(f"file too short ({len(blob)} bytes)")
    (
        magic,
        version,
        flags,
        batch,
        heads,
        tokens,
        head_dim,
        size,
        radius_bits,
        role_tag,
        head_base,
        seed,
        fixed_mult,
        layer,
    ) = struct.unpack_from(_HEADER_FMT, blob, 0)
    if magic != MAGIC:
        raise CorruptData(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"format version {version}, expected {VERSION}")

    (crc_stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != crc_stored:
        raise CorruptData("checksum mismatch")

    table = []
    end = HEADER_BYTES
    for k in range(_SECTION_COUNT):
        off, length = struct.unpack_from("<QQ", blob, 48 + 16 * k)
        if off != end:
            raise CorruptData(f"section {k} offset {off} != expected {end}")
        end = off + length
        table.append((off, length))
    if end + 4 != len(blob):
        raise CorruptData(
            f"file length {len(blob)} != sections end {end} + checksum"
        )

    roles = {tag: role for role, tag in ROLE_TAGS.items()}
    if role_tag not in roles:
        raise CorruptData(f"unknown role tag {role_tag:#x}")
    outlier_enabled = bool(flags & _FLAG_OUTLIER)
    if outlier_enabled != (fixed_mult != 0):
        raise CorruptData("outlier flag and multiplier field disagree")
    try:
        shape = TensorShape(batch, heads, tokens, head_dim)
        config = CodecConfig(
            codebook_size=size,
            radius_bits=radius_bits,
            seed=seed,
            outlier_multiplier=fixed_mult / 65536.0 if outlier_enabled else None,
            median_pooling="per_head" if flags & _FLAG_PER_HEAD else "batch",
        )
    except InvalidArgument as exc:
        raise CorruptData(f"invalid header fields: {exc}") from exc

    def section(k: int) -> bytes:
        off, length = table[k]
        return blob[off : off + length]

    n_tokens = batch * heads * tokens
    n_chunks = n_tokens * shape.chunks_per_vector
    scales_raw = section(0)
    if len(scales_raw) != 2 * n_tokens:
        raise CorruptData("scale section has the wrong length")
    scales = np.frombuffer(scales_raw, dtype="<f2").reshape(batch, heads, tokens).copy()

    chunk_grid = (batch, heads, tokens, shape.chunks_per_vector)
    if outlier_enabled:
        if len(section(3)) != (n_chunks + 7) // 8:
            raise CorruptData("flag bitmap has the wrong length")
        flag_bits = np.unpackbits(
            np.frombuffer(section(3), dtype=np.uint8), bitorder="little", count=n_chunks
        )
        flag_arr = flag_bits.astype(bool).reshape(chunk_grid)
    else:
        if len(section(3)) != 0:
            raise CorruptData("unexpected flag bitmap without extraction")
        flag_arr = np.zeros(chunk_grid, dtype=bool)

    n_coded = n_chunks - int(flag_arr.sum())
    idx_flat = _unpack_uint_stream(section(1), config.index_bits, n_coded)
    if idx_flat.size and int(idx_flat.max()) >= config.index_count:
        raise CorruptData("codeword index out of range")
    quanta_flat = _unpack_uint_stream(section(2), config.radius_bits, n_coded)

    indices = np.zeros(chunk_grid, dtype=np.int32)
    quanta = np.zeros(chunk_grid, dtype=np.uint8)
    coded = ~flag_arr
    indices[coded] = idx_flat.astype(np.int32)
    quanta[coded] = quanta_flat.astype(np.uint8)

    payload_raw = section(4)
    n_out = int(flag_arr.sum())
    if len(payload_raw) != 8 * n_out:
        raise CorruptData("payload section has the wrong length")
    payloads = np.frombuffer(payload_raw, dtype="<f2").reshape(n_out, CHUNK_DIM).copy()

    return QuantizedTensor(
        shape=shape,
        config=config,
        layer=layer,
        role=roles[role_tag],
        scales=scales,
        indices=indices,
        quanta=quanta,
        flags=flag_arr,
        payloads=payloads,
        head_base=head_base,
    )


def write_raw(data: np.ndarray, sink, dtype: str = "f32") -> int:
    """Write a dense (batch, heads, tokens, head_dim) tensor, row-major."""
    codes = {"f32": 0, "f16": 1}
    if dtype not in codes:
        raise InvalidArgument(f"dtype must be f32 or f16, got {dtype!r}")
    data = np.asarray(data)
    if data.ndim != 4:
        raise InvalidArgument("raw tensors must be 4-d (batch, heads, tokens, head_dim)")
    header = struct.pack(_RAW_FMT, RAW_MAGIC, codes[dtype], *data.shape)
    body = np.ascontiguousarray(data.astype(_RAW_DTYPES[codes[dtype]])).tobytes()
    blob = header + body
    if hasattr(sink, "write"):
        sink.write(blob)
    else:
        with open(sink, "wb") as f:
            f.write(blob)
    return len(blob)


def read_raw(source) -> np.ndarray:
    """Read a raw tensor file; returns the stored dtype."""
    if hasattr(source, "read"):
        blob = source.read()
    else:
        with open(source, "rb") as f:
            blob = f.read()
    head = struct.calcsize(_RAW_FMT)
    if len(blob) < head:
        raise CorruptData("raw tensor file too short")
    magic, code, b, h, t, d = struct.unpack_from(_RAW_FMT, blob, 0)
    if magic != RAW_MAGIC:
        raise CorruptData(f"bad raw magic {magic!r}")
    if code not in _RAW_DTYPES:
        raise CorruptData(f"unknown raw dtype code {code}")
    dt = np.dtype(_RAW_DTYPES[code]).newbyteorder("<")
    expected = head + b * h * t * d * dt.itemsize
    if len(blob) != expected:
        raise CorruptData(f"raw length {len(blob)} != expected {expected}")
    return np.frombuffer(blob[head:], dtype=dt).reshape(b, h, t, d).copy()

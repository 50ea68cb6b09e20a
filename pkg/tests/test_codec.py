"""Tensor encode/decode round trips and their error bounds."""

import numpy as np
import pytest

from hqmq.codebook import CodebookBank, build_joint, build_secondary
from hqmq.codec import (
    ChunkCode,
    CodecConfig,
    TensorShape,
    chunk_vector,
    decode_chunk,
    decode_tensor,
    decode_token_range,
    encode_chunk,
    encode_tensor,
    quantize_dequantize,
)
from hqmq.errors import CorruptData, InvalidArgument
from hqmq.hurwitz import build_primary_codebook
from hqmq.packing import estimate_covering
from hqmq.quat import haar_quaternions
from hqmq.radius import RadiusCode
from hqmq.rng import RandomStream


def _tensor(shape, key=0xDA7A):
    b, h, t, d = shape
    g = RandomStream(key).gaussian(b * h * t * d)
    return g.reshape(b, h, t, d)


@pytest.fixture(scope="module")
def joint24():
    return build_joint(build_primary_codebook(), build_secondary(0, 0, 0, "K", 24))


def test_chunk_vector_pads_tail():
    v = np.arange(10, dtype=np.float64)
    c = chunk_vector(v)
    assert c.shape == (3, 4)
    assert np.array_equal(c[2], [8.0, 9.0, 0.0, 0.0])
    with pytest.raises(InvalidArgument):
        chunk_vector(np.zeros((2, 2)))


def test_shape_properties_and_validation():
    s = TensorShape(2, 4, 16, 126)
    assert s.chunks_per_vector == 32
    assert s.padded_dim == 128
    assert s.elements == 2 * 4 * 16 * 126
    with pytest.raises(InvalidArgument):
        TensorShape(0, 1, 1, 4)
    with pytest.raises(InvalidArgument):
        TensorShape(1, 1, -1, 4)
    # Zero tokens is legal: an empty cache is a valid file.
    assert TensorShape(1, 1, 0, 4).elements == 0


def test_config_validation_and_bits():
    cfg = CodecConfig(codebook_size=96, radius_bits=4)
    assert cfg.index_count == 2304
    assert cfg.index_bits == 12
    with pytest.raises(InvalidArgument):
        CodecConfig(codebook_size=0, radius_bits=4)
    with pytest.raises(InvalidArgument):
        CodecConfig(codebook_size=24, radius_bits=9)
    with pytest.raises(InvalidArgument):
        CodecConfig(codebook_size=24, radius_bits=4, seed=-1)
    with pytest.raises(InvalidArgument):
        CodecConfig(codebook_size=24, radius_bits=4, outlier_multiplier=0.0)
    with pytest.raises(InvalidArgument):
        CodecConfig(codebook_size=24, radius_bits=4, median_pooling="global")


def test_encode_chunk_zero_norm_sentinel(joint24):
    code = encode_chunk(np.zeros(4), joint24, sigma=1.0, radius_bits=4)
    assert code.index == 0
    assert code.radius.quantum == 0
    assert np.array_equal(decode_chunk(code, joint24, sigma=1.0), np.zeros(4))


def test_decode_chunk_rejects_bad_index(joint24):
    bad = ChunkCode(index=24 * 24, radius=RadiusCode(quantum=0, bits=4))
    with pytest.raises(CorruptData):
        decode_chunk(bad, joint24, sigma=1.0)


def test_chunk_roundtrip_bounds(joint24):
    # Radius error bounded by half a quantizer step; angular error bounded
    # by the codebook's measured covering radius.
    rho = estimate_covering(joint24, n_probes=20_000, probe_seed=1).rho_hat
    stream = RandomStream(0xC0FFEE)
    chunks = stream.gaussian(4 * 512).reshape(512, 4)
    norms = np.sqrt((chunks**2).sum(axis=1))
    sigma = float(norms.max())
    bits = 5
    bound = sigma / (2 * (2**bits - 1))
    for i in range(512):
        code = encode_chunk(chunks[i], joint24, sigma=sigma, radius_bits=bits)
        back = decode_chunk(code, joint24, sigma=sigma)
        r_back = np.sqrt((back**2).sum())
        assert abs(r_back - norms[i]) <= bound + 1e-12
        cos = float(back @ chunks[i] / (r_back * norms[i]))
        assert np.arccos(np.clip(cos, -1, 1)) <= rho + 1e-9


def test_encode_tensor_determinism():
    data = _tensor((2, 3, 8, 16))
    cfg = CodecConfig(codebook_size=24, radius_bits=3, outlier_multiplier=3.0)
    a = encode_tensor(data, cfg)
    b = encode_tensor(data, cfg)
    for field in ("scales", "indices", "quanta", "flags", "payloads"):
        assert np.array_equal(getattr(a, field), getattr(b, field))


def test_tensor_roundtrip_improves_with_codebook_size():
    data = _tensor((1, 2, 32, 64))
    errs = []
    for size in (24, 96, 384):
        cfg = CodecConfig(codebook_size=size, radius_bits=6)
        out = quantize_dequantize(data, cfg)
        errs.append(np.linalg.norm(out - data) / np.linalg.norm(data))
    assert errs[0] > errs[1] > errs[2]


def test_cell_exact_inputs_roundtrip():
    # Chunks built exactly as codeword * grid radius with a power-of-two
    # sigma reproduce themselves to float precision.
    cfg = CodecConfig(codebook_size=24, radius_bits=4)
    bank = CodebookBank(seed=cfg.seed, size=cfg.codebook_size)
    joint = bank.joint(0, 0, "K")
    top = 2**4 - 1
    sigma = 2.0  # exact in float16
    picks = RandomStream(0x9E7).raw(32)
    rows = []
    for i in range(32):
        cw = joint.codewords[int(picks[i]) % joint.codewords.shape[0]]
        level = int(picks[i] >> np.uint64(32)) % top + 1
        rows.append(cw * (sigma * level / top))
    data = np.stack(rows).reshape(1, 1, 8, 16)
    # Force sigma: add one chunk at exactly the scale ceiling.
    data[0, 0, :, 0:4] = joint.codewords[0] * sigma
    out = quantize_dequantize(data, cfg)
    assert np.max(np.abs(out - data)) < 1e-9


def test_flagged_chunks_ride_as_fp16(tmp_path):
    data = _tensor((1, 2, 16, 8))
    data[0, 1, 3, 0:4] *= 100.0  # one clear outlier chunk
    cfg = CodecConfig(codebook_size=24, radius_bits=3, outlier_multiplier=3.0)
    packed = encode_tensor(data, cfg)
    assert packed.flags[0, 1, 3, 0]
    out = decode_tensor(packed, CodebookBank(seed=cfg.seed, size=cfg.codebook_size))
    # The outlier chunk is exact to fp16, untouched by the codebook.
    expect = data[0, 1, 3, 0:4].astype(np.float16).astype(np.float64)
    assert np.array_equal(out[0, 1, 3, 0:4], expect)


def test_scales_match_post_extraction_max():
    data = _tensor((1, 1, 4, 8))
    data[0, 0, 2, 0:4] *= 50.0
    cfg = CodecConfig(codebook_size=24, radius_bits=3, outlier_multiplier=3.0)
    packed = encode_tensor(data, cfg)
    chunks = data[0, 0, 2].reshape(2, 4)
    # The flagged chunk does not inflate sigma for its token.
    live_norm = np.sqrt((chunks[1] ** 2).sum())
    assert packed.scales[0, 0, 2] == np.float16(live_norm)


def test_decode_token_range_matches_full_decode():
    data = _tensor((2, 2, 21, 12))
    cfg = CodecConfig(codebook_size=48, radius_bits=4, outlier_multiplier=3.0)
    packed = encode_tensor(data, cfg)
    bank = CodebookBank(seed=cfg.seed, size=cfg.codebook_size)
    full = decode_tensor(packed, bank)
    for start, stop in ((0, 21), (0, 7), (7, 14), (20, 21), (5, 5)):
        tile = decode_token_range(packed, bank, start, stop)
        assert tile.shape == (2, 2, stop - start, 12)
        assert np.array_equal(tile, full[:, :, start:stop])


def test_decode_token_range_validates(joint24):
    data = _tensor((1, 1, 4, 8))
    cfg = CodecConfig(codebook_size=24, radius_bits=3)
    packed = encode_tensor(data, cfg)
    bank = CodebookBank(seed=cfg.seed, size=cfg.codebook_size)
    with pytest.raises(InvalidArgument):
        decode_token_range(packed, bank, 2, 1)
    with pytest.raises(InvalidArgument):
        decode_token_range(packed, bank, 0, 5)
    packed.indices[0, 0, 0, 0] = 24 * 24  # out of range
    with pytest.raises(CorruptData):
        decode_token_range(packed, bank, 0, 4)


def test_head_base_reuses_shifted_codebooks():
    data = _tensor((1, 2, 8, 8))
    cfg = CodecConfig(codebook_size=24, radius_bits=4)
    bank = CodebookBank(seed=cfg.seed, size=cfg.codebook_size)
    whole = encode_tensor(data, cfg, bank=bank)
    tail = encode_tensor(data[:, 1:], cfg, bank=bank, head_base=1)
    assert np.array_equal(whole.indices[:, 1:], tail.indices)
    assert np.array_equal(
        decode_tensor(whole, bank)[:, 1:], decode_tensor(tail, bank)
    )


def test_all_zero_token_roundtrip():
    data = _tensor((1, 1, 4, 8))
    data[0, 0, 1] = 0.0
    cfg = CodecConfig(codebook_size=24, radius_bits=3)
    packed = encode_tensor(data, cfg)
    assert packed.scales[0, 0, 1] == np.float16(1.0)
    out = decode_tensor(packed, CodebookBank(seed=cfg.seed, size=cfg.codebook_size))
    assert np.array_equal(out[0, 0, 1], np.zeros(8))


def test_empty_token_axis():
    data = np.zeros((1, 2, 0, 8))
    cfg = CodecConfig(codebook_size=24, radius_bits=3, outlier_multiplier=3.0)
    packed = encode_tensor(data, cfg)
    out = decode_tensor(packed, CodebookBank(seed=cfg.seed, size=cfg.codebook_size))
    assert out.shape == (1, 2, 0, 8)


def test_per_head_pooling_differs_from_batch():
    # One head much hotter than the other: batch pooling flags most of the
    # hot head, per-head pooling does not.
    data = _tensor((1, 2, 64, 8))
    data[0, 1] *= 10.0
    base = dict(codebook_size=24, radius_bits=3, outlier_multiplier=3.0)
    batch = encode_tensor(data, CodecConfig(**base, median_pooling="batch"))
    per_head = encode_tensor(data, CodecConfig(**base, median_pooling="per_head"))
    assert batch.outlier_fraction > per_head.outlier_fraction
    assert per_head.outlier_fraction < 0.05


def test_encode_rejects_bad_role_and_shape():
    data = _tensor((1, 1, 4, 8))
    cfg = CodecConfig(codebook_size=24, radius_bits=3)
    with pytest.raises(InvalidArgument):
        encode_tensor(data, cfg, role="Q")
    with pytest.raises(InvalidArgument):
        encode_tensor(data[0], cfg)

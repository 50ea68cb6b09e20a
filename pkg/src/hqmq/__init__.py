"""Multiplicative quaternion quantization for KV-cache-shaped tensors.

Each 4-element chunk of a key or value vector is treated as a quaternion
and stored as a scalar-quantized radius plus the nearest codeword of a
joint direction codebook: the 24 unit Hurwitz quaternions times a small
seeded secondary codebook, giving 24x the effective codewords per stored
parameter. Includes baselines, covering-radius analysis, a packed file
format, and a fused decode-inside-attention reference.
"""

from .attention import AttentionConfig, fused_attend, reference_attend
from .baselines import (
    additive_vq_roundtrip,
    build_additive_pair,
    naive_int_roundtrip,
    naive_int_with_extraction,
)
from .bitbudget import BitBudget, budget, cache_size_bytes
from .codebook import (
    CodebookBank,
    JointCodebook,
    SecondaryCodebook,
    build_joint,
    build_secondary,
    nearest,
)
from .codec import (
    ChunkCode,
    CodecConfig,
    QuantizedTensor,
    TensorShape,
    chunk_vector,
    decode_chunk,
    decode_tensor,
    encode_chunk,
    encode_tensor,
    quantize_dequantize,
)
from .errors import (
    ConfigMismatch,
    CorruptData,
    DegenerateChunk,
    InvalidArgument,
    UnsupportedVersion,
)
from .hurwitz import GroupReport, PrimaryCodebook, build_primary_codebook, verify_group
from .kernels import COMPILED_AVAILABLE
from .kvpack import read_kvpack, read_raw, write_kvpack, write_raw
from .outliers import OutlierPolicy, effective_bits, extract
from .packing import (
    CoveringEstimate,
    RateFit,
    check_distinctness,
    estimate_covering,
    fit_covering_rate,
    seed_variance,
)
from .quat import angle, hamilton, haar_sample, norm, normalize
from .radius import RadiusCode, dequantize_radius, quantize_radius, token_scale
from .synth import (
    DistortionReport,
    SynthProfile,
    gen_chunks,
    outlier_sweep,
    pareto_sweep,
)

__version__ = "0.1.0"

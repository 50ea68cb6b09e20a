"""Synthetic KV-tensor generators and distortion sweeps.

Two profiles cover the regimes that matter for quantizer comparisons:

- "gaussian": iid standard normal elements, so chunk norms follow a
  chi(4) distribution. The well-behaved baseline case.
- "outlier_heavy": a gaussian base with a small fraction of chunks scaled
  by log-normal multipliers, then rescaled so the max/median chunk-norm
  ratio lands at a requested target. This mimics attention caches whose
  few massive channels dominate the dynamic range.

Sweeps quantize one generated tensor under several configurations and
report bits per element next to angular and Frobenius distortion, CSV-ready
for plotting rate-distortion fronts.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, replace

import numpy as np

from .baselines import (
    additive_bits_per_chunk,
    additive_vq_roundtrip,
    naive_int_roundtrip,
    naive_int_with_extraction,
)
from .bitbudget import FP16_BITS, budget
from .codec import (
    CHUNK_DIM,
    CodecConfig,
    TensorShape,
    _as_4d,
    _chunked,
    decode_tensor,
    encode_tensor,
)
from .errors import InvalidArgument
from .outliers import effective_bits
from .rng import TAG_SYNTH, RandomStream

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class SynthProfile:
    """Generator settings; see the module docstring for the two kinds."""

    kind: str = "gaussian"
    element_scale: float = 1.0
    outlier_fraction: float = 0.02
    log_median: float = math.log(25.0)
    log_sigma: float = 0.6
    target_ratio: float = 150.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "outlier_heavy"):
            raise InvalidArgument(f"unknown profile kind {self.kind!r}")
        if self.element_scale < 0.0:
            raise InvalidArgument("element scale must be nonnegative")
        if not 0.0 < self.outlier_fraction < 1.0 and self.kind == "outlier_heavy":
            raise InvalidArgument("outlier fraction must be in (0, 1)")


GAUSSIAN = SynthProfile(kind="gaussian")
OUTLIER_HEAVY = SynthProfile(kind="outlier_heavy")


def gen_chunks(
    profile: SynthProfile, shape: TensorShape, seed: int = 0
) -> np.ndarray:
    """Generate a (batch, heads, tokens, head_dim) tensor.

    outlier_heavy marks whole chunks (including any padded tail chunk) and
    rescales the multipliers so max chunk norm / lower-median chunk norm
    equals target_ratio whenever at least one chunk was marked.
    """
    stream = RandomStream(TAG_SYNTH, seed)
    dims = (shape.batch, shape.heads, shape.tokens, shape.head_dim)
    n_elements = int(np.prod(dims))
    if n_elements == 0:
        return np.zeros(dims)
    data = profile.element_scale * stream.gaussian(n_elements).reshape(dims)
    if profile.kind == "gaussian":
        return data

    chunks = _chunked(data, shape).copy()
    n_chunks = int(np.prod(chunks.shape[:4]))
    marked = stream.uniform(n_chunks) < profile.outlier_fraction
    if marked.any():
        multipliers = np.exp(
            profile.log_median + profile.log_sigma * stream.gaussian(int(marked.sum()))
        )
        factor = np.ones(n_chunks)
        factor[marked] = multipliers
        chunks *= factor.reshape(chunks.shape[:4])[..., None]

        norms = np.sqrt((chunks * chunks).sum(axis=4)).ravel()
        med = float(np.partition(norms, (norms.size - 1) // 2)[(norms.size - 1) // 2])
        peak = float(norms.max())
        if med > 0.0 and peak > 0.0:
            correction = profile.target_ratio * med / peak
            factor2 = np.ones(n_chunks)
            factor2[marked] = correction
            chunks *= factor2.reshape(chunks.shape[:4])[..., None]
    flat = chunks.reshape(shape.batch, shape.heads, shape.tokens, shape.padded_dim)
    return flat[..., : shape.head_dim]


@dataclass(frozen=True)
class ConfigSpec:
    """Parsed sweep configuration label."""

    label: str
    kind: str  # "hqmq" | "int" | "additive"
    size: int = 0
    radius_bits: int = 0
    int_bits: int = 0
    outlier_multiplier: float | None = None


_HQMQ_RE = re.compile(r"^s(\d+)_r(\d+)(?:\+med(\d+(?:\.\d+)?))?$")
_INT_RE = re.compile(r"^int(\d+)(?:\+med(\d+(?:\.\d+)?))?$")
_ADD_RE = re.compile(r"^add(\d+)_r(\d+)$")


def parse_config(label: str) -> ConfigSpec:
    """Parse labels like s96_r4, s24_r3+med3, int4, int4+med3, add24_r3."""
    label = label.strip()
    m = _HQMQ_RE.match(label)
    if m:
        mult = float(m.group(3)) if m.group(3) else None
        return ConfigSpec(
            label=label,
            kind="hqmq",
            size=int(m.group(1)),
            radius_bits=int(m.group(2)),
            outlier_multiplier=mult,
        )
    m = _INT_RE.match(label)
    if m:
        mult = float(m.group(2)) if m.group(2) else None
        return ConfigSpec(
            label=label, kind="int", int_bits=int(m.group(1)), outlier_multiplier=mult
        )
    m = _ADD_RE.match(label)
    if m:
        return ConfigSpec(
            label=label,
            kind="additive",
            size=int(m.group(1)),
            radius_bits=int(m.group(2)),
        )
    raise InvalidArgument(f"cannot parse config label {label!r}")


@dataclass(frozen=True)
class DistortionReport:
    label: str
    bits_per_element: float
    mean_angle: float
    p95_angle: float
    rel_frobenius: float
    outlier_fraction: float


def distortion_metrics(
    original: np.ndarray, decoded: np.ndarray
) -> tuple[float, float, float]:
    """(mean angle, 95th percentile angle, relative Frobenius error).

    Angles are taken per chunk between original and decoded directions,
    over chunks whose original norm is nonzero; a chunk decoded to zero
    counts the right angle (direction fully lost). Tensors with no nonzero
    chunks report zero angles.
    """
    original, shape = _as_4d(original)
    decoded = np.asarray(decoded, dtype=np.float64)
    if decoded.shape != original.shape:
        raise InvalidArgument("original and decoded shapes differ")

    a = _chunked(original, shape).reshape(-1, CHUNK_DIM)
    b = _chunked(decoded, shape).reshape(-1, CHUNK_DIM)
    na = np.sqrt((a * a).sum(axis=1))
    nb = np.sqrt((b * b).sum(axis=1))
    live = na > NORM_FLOOR
    if live.any():
        both = live & (nb > NORM_FLOOR)
        cos = np.zeros(a.shape[0])
        cos[both] = (a[both] * b[both]).sum(axis=1) / (na[both] * nb[both])
        angles = np.where(both, np.arccos(np.clip(cos, -1.0, 1.0)), np.pi / 2.0)[live]
        mean_angle = float(angles.mean())
        p95 = float(np.percentile(angles, 95.0))
    else:
        mean_angle = p95 = 0.0

    denom = float(np.sqrt((original**2).sum()))
    err = float(np.sqrt(((original - decoded) ** 2).sum()))
    rel = err / denom if denom > 0 else 0.0
    return mean_angle, p95, rel


def _report_bits(spec: ConfigSpec, head_dim: int, fraction: float) -> float:
    """Fractional-mode bits per element, outlier cost folded in via the
    extraction accounting when the config extracts."""
    if spec.kind == "hqmq":
        base = budget(spec.size, spec.radius_bits, head_dim).per_element_with_scale
    elif spec.kind == "int":
        base = spec.int_bits + FP16_BITS / head_dim
    else:
        chunks = -(-head_dim // CHUNK_DIM)
        per_chunk = additive_bits_per_chunk(spec.size, spec.radius_bits, ceiled=False)
        base = per_chunk * chunks / head_dim + FP16_BITS / head_dim
    if spec.outlier_multiplier is None:
        return base
    return effective_bits(base, fraction)


def run_config(
    spec: ConfigSpec, data: np.ndarray, seed: int = 0
) -> DistortionReport:
    """Quantize data under one parsed config and measure distortion."""
    _, shape = _as_4d(data)
    fraction = 0.0
    if spec.kind == "hqmq":
        config = CodecConfig(
            codebook_size=spec.size,
            radius_bits=spec.radius_bits,
            seed=seed,
            outlier_multiplier=spec.outlier_multiplier,
        )
        packed = encode_tensor(data, config)
        fraction = packed.outlier_fraction
        decoded = decode_tensor(packed)
    elif spec.kind == "int":
        if spec.outlier_multiplier is None:
            decoded = naive_int_roundtrip(data, spec.int_bits)
        else:
            decoded, fraction = naive_int_with_extraction(
                data, spec.int_bits, spec.outlier_multiplier
            )
    else:
        decoded = additive_vq_roundtrip(data, spec.size, spec.radius_bits, seed)
    mean_angle, p95, rel = distortion_metrics(data, decoded)
    return DistortionReport(
        label=spec.label,
        bits_per_element=_report_bits(spec, shape.head_dim, fraction),
        mean_angle=mean_angle,
        p95_angle=p95,
        rel_frobenius=rel,
        outlier_fraction=fraction,
    )


def pareto_sweep(
    labels, profile: SynthProfile, shape: TensorShape, seed: int = 0
) -> list[DistortionReport]:
    """One generated tensor, many configs."""
    specs = [parse_config(label) for label in labels]
    data = gen_chunks(profile, shape, seed)
    return [run_config(spec, data, seed) for spec in specs]


@dataclass(frozen=True)
class OutlierSweepPoint:
    multiplier: float
    fraction: float
    report: DistortionReport


def outlier_sweep(
    multipliers,
    profile: SynthProfile,
    shape: TensorShape,
    base_label: str = "s96_r4",
    seed: int = 0,
) -> list[OutlierSweepPoint]:
    """Distortion of one base config across extraction thresholds."""
    base = parse_config(base_label)
    if base.kind != "hqmq":
        raise InvalidArgument("outlier sweeps apply to hqmq configs")
    data = gen_chunks(profile, shape, seed)
    points = []
    for mult in multipliers:
        mult = float(mult)
        spec = replace(
            base, label=f"{base.label}+med{mult:g}", outlier_multiplier=mult
        )
        report = run_config(spec, data, seed)
        points.append(
            OutlierSweepPoint(
                multiplier=mult, fraction=report.outlier_fraction, report=report
            )
        )
    return points


def sweep_csv(reports, sink) -> None:
    writer = csv.writer(sink)
    writer.writerow(
        ["config", "bits_per_element", "mean_angle_rad", "p95_angle_rad", "rel_frob", "outlier_p"]
    )
    for r in reports:
        writer.writerow(
            [
                r.label,
                f"{r.bits_per_element:.4f}",
                f"{r.mean_angle:.6f}",
                f"{r.p95_angle:.6f}",
                f"{r.rel_frobenius:.6f}",
                f"{r.outlier_fraction:.6f}",
            ]
        )

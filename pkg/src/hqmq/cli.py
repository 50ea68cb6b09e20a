"""Command-line interface.

Subcommands:
  quantize      raw tensor file -> kvpack file
  dequantize    kvpack file -> raw tensor file
  sweep         rate-distortion sweep over configs on a synthetic profile
  bench         outlier-threshold sweep of one config on a synthetic profile
  covering      Monte-Carlo covering estimates over codebook sizes
  bits          bit budget for one config string
  verify-group  check the 24-element primary codebook's group structure

Exit codes: 0 success, 2 argument errors, 3 data errors (bad files,
failed checks).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .bitbudget import budget
from .codec import CodecConfig, TensorShape, decode_tensor, encode_tensor
from .errors import CorruptData, InvalidArgument, UnsupportedVersion
from .hurwitz import build_primary_codebook, verify_group
from .kvpack import read_kvpack, read_raw, write_kvpack, write_raw
from .packing import covering_csv, fit_covering_rate
from .synth import (
    GAUSSIAN,
    OUTLIER_HEAVY,
    SynthProfile,
    outlier_sweep,
    parse_config,
    pareto_sweep,
    sweep_csv,
)

DATA_ERROR = 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _shape(text: str) -> TensorShape:
    parts = _int_list(text)
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("shape must be batch,heads,tokens,head_dim")
    try:
        return TensorShape(*parts)
    except InvalidArgument as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _config_label(text: str):
    try:
        return parse_config(text)
    except InvalidArgument as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _config_list(text: str) -> list[str]:
    labels = [part.strip() for part in text.split(",") if part.strip()]
    if not labels:
        raise argparse.ArgumentTypeError("expected at least one config label")
    for label in labels:
        _config_label(label)
    return labels


def _hqmq_label(text: str) -> str:
    if _config_label(text).kind != "hqmq":
        raise argparse.ArgumentTypeError(f"expected an sN_rM config, got {text!r}")
    return text


def _profile(name: str) -> SynthProfile:
    return {"gaussian": GAUSSIAN, "outlier_heavy": OUTLIER_HEAVY}[name]


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hqmq", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"hqmq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="quantize a raw tensor file to kvpack")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--S", type=int, required=True, help="secondary codebook size")
    p.add_argument("--br", type=int, required=True, help="radius bits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outlier-c", type=float, default=None, help="median multiplier; omit to disable extraction")
    p.add_argument("--per-head-median", action="store_true", help="pool the outlier median per head instead of across heads")
    p.add_argument("--role", choices=["K", "V"], default="K")
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--head", type=int, default=0, help="codebook head index of the tensor's first head")

    p = sub.add_parser("dequantize", help="decode a kvpack file to a raw tensor file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dtype", choices=["f32", "f16"], default="f32")

    p = sub.add_parser("sweep", help="rate-distortion sweep, CSV out")
    p.add_argument("--configs", type=_config_list, required=True, help="comma-separated labels, e.g. s24_r3,s96_r4+med3,int4,add24_r3")
    p.add_argument("--profile", choices=["gaussian", "outlier_heavy"], default="gaussian")
    p.add_argument("--shape", type=_shape, default=TensorShape(1, 4, 256, 128))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("bench", help="outlier-threshold sweep of one config, CSV out")
    p.add_argument("--config", type=_hqmq_label, default="s96_r4")
    p.add_argument("--c-values", type=_float_list, default=[2.0, 3.0, 4.0, 5.0, 100.0])
    p.add_argument("--profile", choices=["gaussian", "outlier_heavy"], default="outlier_heavy")
    p.add_argument("--shape", type=_shape, default=TensorShape(1, 4, 256, 128))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("covering", help="Monte-Carlo covering estimates, CSV out")
    p.add_argument("--sizes", type=_int_list, default=[1, 4, 16, 64, 256])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probes", type=int, default=100_000)
    p.add_argument("--probe-seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("bits", help="bit budget for one config")
    p.add_argument("--config", type=_hqmq_label, required=True)
    p.add_argument("--dh", type=int, default=128, help="head dimension")

    sub.add_parser("verify-group", help="check the primary codebook group structure")
    return parser


def _cmd_quantize(args) -> int:
    data = read_raw(args.input).astype(np.float64)
    config = CodecConfig(
        codebook_size=args.S,
        radius_bits=args.br,
        seed=args.seed,
        outlier_multiplier=args.outlier_c,
        median_pooling="per_head" if args.per_head_median else "batch",
    )
    packed = encode_tensor(
        data, config, layer=args.layer, role=args.role, head_base=args.head
    )
    written = write_kvpack(packed, args.output)
    print(f"wrote {written} bytes: {args.output}", file=sys.stderr)
    return 0


def _cmd_dequantize(args) -> int:
    packed = read_kvpack(args.input)
    data = decode_tensor(packed)
    written = write_raw(data, args.output, dtype=args.dtype)
    print(f"wrote {written} bytes: {args.output}", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    reports = pareto_sweep(args.configs, _profile(args.profile), args.shape, args.seed)
    sink, close = _open_out(args.out)
    try:
        sweep_csv(reports, sink)
    finally:
        if close:
            sink.close()
    return 0


def _cmd_bench(args) -> int:
    points = outlier_sweep(
        args.c_values, _profile(args.profile), args.shape, args.config, args.seed
    )
    sink, close = _open_out(args.out)
    try:
        sweep_csv([pt.report for pt in points], sink)
    finally:
        if close:
            sink.close()
    return 0


def _cmd_covering(args) -> int:
    _, estimates = fit_covering_rate(
        args.sizes, seed=args.seed, n_probes=args.probes, probe_seed=args.probe_seed
    )
    sink, close = _open_out(args.out)
    try:
        covering_csv(estimates, sink)
    finally:
        if close:
            sink.close()
    return 0


def _cmd_bits(args) -> int:
    spec = parse_config(args.config)
    frac = budget(spec.size, spec.radius_bits, args.dh, mode="fractional")
    ceil = budget(spec.size, spec.radius_bits, args.dh, mode="ceiled")
    print(f"config {spec.label}, head_dim {args.dh}")
    print(
        f"fractional: {frac.per_element:.2f} / {frac.per_element_with_scale:.2f}"
        "  (per element / with per-token scale)"
    )
    print(f"ceiled:     {ceil.per_element:.2f} / {ceil.per_element_with_scale:.2f}")
    print(f"fp16 ratio: {frac.compression_ratio:.2f}x")
    return 0


def _cmd_verify_group(args) -> int:
    report = verify_group(build_primary_codebook())
    closure = "ok" if report.closure else "FAILED"
    print(f"closure: {closure}, min angle: {report.min_angle_deg} deg")
    print(f"identity index: {report.identity_index}")
    print(
        "angle histogram: "
        + ", ".join(f"{deg} deg x{count}" for deg, count in sorted(report.angle_histogram.items()))
    )
    return 0 if report.ok else DATA_ERROR


_COMMANDS = {
    "quantize": _cmd_quantize,
    "dequantize": _cmd_dequantize,
    "sweep": _cmd_sweep,
    "bench": _cmd_bench,
    "covering": _cmd_covering,
    "bits": _cmd_bits,
    "verify-group": _cmd_verify_group,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (CorruptData, UnsupportedVersion, InvalidArgument, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())

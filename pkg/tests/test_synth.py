"""Synthetic workload generation and the sweep driver."""

import io
import math

import numpy as np
import pytest

from hqmq.codec import TensorShape
from hqmq.errors import InvalidArgument
from hqmq.synth import (
    GAUSSIAN,
    OUTLIER_HEAVY,
    SynthProfile,
    distortion_metrics,
    gen_chunks,
    outlier_sweep,
    parse_config,
    pareto_sweep,
    run_config,
    sweep_csv,
)

scipy_stats = pytest.importorskip("scipy.stats")

SHAPE = TensorShape(1, 4, 256, 64)


def test_gaussian_chunk_norms_follow_chi4():
    # Norms of 4-dim standard gaussian chunks are chi with 4 degrees of
    # freedom; check with a two-sided KS test on a large sample.
    data = gen_chunks(GAUSSIAN, TensorShape(1, 2, 512, 64), seed=0)
    chunks = data.reshape(-1, 4)
    norms = np.sqrt((chunks**2).sum(axis=1))
    stat, pvalue = scipy_stats.kstest(norms, scipy_stats.chi(4).cdf)
    assert pvalue > 0.01


def test_gen_determinism_and_seed_sensitivity():
    a = gen_chunks(GAUSSIAN, SHAPE, seed=0)
    b = gen_chunks(GAUSSIAN, SHAPE, seed=0)
    c = gen_chunks(GAUSSIAN, SHAPE, seed=1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_outlier_heavy_hits_target_ratio():
    data = gen_chunks(OUTLIER_HEAVY, TensorShape(1, 8, 512, 128), seed=0)
    chunks = data.reshape(-1, 4)
    norms = np.sqrt((chunks**2).sum(axis=1))
    med = np.partition(norms, (norms.size - 1) // 2)[(norms.size - 1) // 2]
    ratio = norms.max() / med
    assert ratio == pytest.approx(OUTLIER_HEAVY.target_ratio, rel=0.01)
    # Well inside the reported 80-280x band.
    assert 80.0 <= ratio <= 280.0


def test_outlier_heavy_marked_fraction():
    data = gen_chunks(OUTLIER_HEAVY, TensorShape(1, 8, 512, 128), seed=0)
    chunks = data.reshape(-1, 4)
    norms = np.sqrt((chunks**2).sum(axis=1))
    med = np.partition(norms, (norms.size - 1) // 2)[(norms.size - 1) // 2]
    heavy = float((norms > 3.0 * med).mean())
    assert 0.005 <= heavy <= 0.05


def test_profile_validation():
    with pytest.raises(InvalidArgument):
        SynthProfile(kind="cauchy")
    with pytest.raises(InvalidArgument):
        SynthProfile(kind="outlier_heavy", outlier_fraction=0.0)


def test_empty_tensor():
    data = gen_chunks(GAUSSIAN, TensorShape(1, 1, 0, 16), seed=0)
    assert data.shape == (1, 1, 0, 16)


def test_parse_config_grammars():
    spec = parse_config("s96_r4")
    assert (spec.kind, spec.size, spec.radius_bits) == ("hqmq", 96, 4)
    assert spec.outlier_multiplier is None
    spec = parse_config("s24_r3+med3")
    assert spec.outlier_multiplier == 3.0
    spec = parse_config("s24_r3+med2.5")
    assert spec.outlier_multiplier == 2.5
    spec = parse_config("int4")
    assert (spec.kind, spec.int_bits) == ("int", 4)
    spec = parse_config("int4+med3")
    assert spec.outlier_multiplier == 3.0
    spec = parse_config("add24_r3")
    assert (spec.kind, spec.size, spec.radius_bits) == ("additive", 24, 3)


def test_parse_config_rejects_junk():
    for label in ("s96", "r4", "int", "s_r4", "add24", "s96_r4+", "med3", ""):
        with pytest.raises(InvalidArgument):
            parse_config(label)


def test_distortion_metrics_identity_and_loss():
    data = gen_chunks(GAUSSIAN, TensorShape(1, 1, 32, 16), seed=2)
    mean_angle, p95, rel = distortion_metrics(data, data)
    # arccos near 1 leaves ~1e-8 of float fuzz in the angles.
    assert mean_angle < 1e-6 and p95 < 1e-6 and rel == 0.0
    # A decoded-to-zero tensor loses every direction: right angle.
    mean_angle, p95, rel = distortion_metrics(data, np.zeros_like(data))
    assert mean_angle == pytest.approx(math.pi / 2)
    assert rel == pytest.approx(1.0)


def test_distortion_metrics_shape_check():
    data = gen_chunks(GAUSSIAN, TensorShape(1, 1, 4, 16), seed=0)
    with pytest.raises(InvalidArgument):
        distortion_metrics(data, data[:, :, :2])


def test_run_config_kinds():
    data = gen_chunks(GAUSSIAN, TensorShape(1, 2, 64, 32), seed=3)
    hq = run_config(parse_config("s24_r3"), data)
    iq = run_config(parse_config("int4"), data)
    aq = run_config(parse_config("add8_r3"), data)
    for report in (hq, iq, aq):
        assert report.rel_frobenius > 0.0
        assert report.bits_per_element > 0.0
    assert hq.outlier_fraction == 0.0
    hq_med = run_config(parse_config("s24_r3+med3"), data)
    assert hq_med.bits_per_element > hq.bits_per_element


def test_pareto_sweep_and_csv():
    reports = pareto_sweep(
        ["s24_r3", "int4"], GAUSSIAN, TensorShape(1, 1, 64, 32), seed=0
    )
    assert [r.label for r in reports] == ["s24_r3", "int4"]
    sink = io.StringIO()
    sweep_csv(reports, sink)
    lines = sink.getvalue().strip().splitlines()
    assert lines[0] == (
        "config,bits_per_element,mean_angle_rad,p95_angle_rad,rel_frob,outlier_p"
    )
    assert len(lines) == 3
    assert lines[1].startswith("s24_r3,")


def test_outlier_sweep_fraction_monotone():
    points = outlier_sweep(
        [2.0, 3.0, 5.0, 100.0],
        OUTLIER_HEAVY,
        TensorShape(1, 2, 256, 64),
        base_label="s24_r3",
    )
    fractions = [p.fraction for p in points]
    for lo, hi in zip(fractions[1:], fractions):
        assert lo <= hi
    with pytest.raises(InvalidArgument):
        outlier_sweep([3.0], GAUSSIAN, SHAPE, base_label="int4")

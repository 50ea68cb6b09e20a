#!/usr/bin/env python3
"""Throughput of the compiled nearest-codeword scan vs the numpy fallback.

Both paths run on the same Haar-random directions against joint codebooks
of a few secondary sizes. Outputs must agree bit for bit (the suite
asserts it too; here it is re-checked on the benchmark inputs before any
timing is reported). Without the extension the compiled column reads
n/a and only the fallback is timed.

    python3 benchmarks/bench_kernels.py --probes 200000 --sizes 1,4,16,64
"""

import argparse
import time

import numpy as np

from hqmq.codebook import CodebookBank
from hqmq.kernels import COMPILED_AVAILABLE, nearest_scan_py
from hqmq.quat import haar_quaternions
from hqmq.rng import RandomStream

if COMPILED_AVAILABLE:
    from hqmq import _kernels


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--probes", type=int, default=200_000)
    parser.add_argument(
        "--sizes",
        default="1,4,16,64",
        help="comma-separated secondary sizes (codewords = 24 x size)",
    )
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    dirs = haar_quaternions(RandomStream(0xBE7C, args.seed), args.probes)

    print(f"probes: {args.probes}   best of {args.repeats} runs")
    print(f"{'S':>6} {'words':>7} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for size in sizes:
        joint = CodebookBank(seed=args.seed, size=size).joint(0, 0, "K")
        cw = joint.codewords

        idx_py, cos_py = nearest_scan_py(dirs, cw)
        t_py = _best_of(lambda: nearest_scan_py(dirs, cw), args.repeats)

        if COMPILED_AVAILABLE:
            idx_c, cos_c = _kernels.nearest_scan(dirs, cw)
            if not (np.array_equal(idx_py, idx_c) and np.array_equal(cos_py, cos_c)):
                print(f"S={size}: compiled and fallback outputs differ, refusing to time")
                return 1
            t_c = _best_of(lambda: _kernels.nearest_scan(dirs, cw), args.repeats)
            print(
                f"{size:>6} {cw.shape[0]:>7} {t_py * 1e3:>10.1f} "
                f"{t_c * 1e3:>12.1f} {t_py / t_c:>7.1f}x"
            )
        else:
            print(f"{size:>6} {cw.shape[0]:>7} {t_py * 1e3:>10.1f} {'n/a':>12} {'':>8}")
    if not COMPILED_AVAILABLE:
        print("compiled extension not built; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

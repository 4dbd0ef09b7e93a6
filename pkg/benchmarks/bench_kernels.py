#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

Run after building the extension:

    python benchmarks/bench_kernels.py [--repeat 50]

Sizes reflect the shapes the meta-training loop actually produces
(episode batches of 8 patients, ~20 visits, small/medium embeddings).
"""

import argparse
import time

import numpy as np

from metapred.kernels import load_backend


def bench(fn, args, repeat):
    fn(*args)  # warmup
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def cases(dtype):
    rng = np.random.default_rng(0)
    for b, t, d, f, l, v, s in [(8, 20, 32, 16, 3, 200, 6),
                                (32, 20, 64, 32, 3, 1017, 8),
                                (32, 24, 256, 128, 4, 1017, 10)]:
        x = rng.normal(size=(b, t, d)).astype(dtype)
        w = rng.normal(size=(f, l, d)).astype(dtype)
        g = rng.normal(size=(b, t - l + 1, f)).astype(dtype)
        table = rng.normal(size=(v, d)).astype(dtype)
        codes = rng.integers(0, v, size=(b, t, s)).astype(np.int32)
        mask = np.ones((b, t, s), dtype=dtype)
        ge = rng.normal(size=(b, t, d)).astype(dtype)
        tag = f"B{b} T{t} d{d} F{f} l{l} V{v}"
        yield tag, [
            ("conv1d_fwd", (x, w)),
            ("conv1d_dx", (g, w, t)),
            ("conv1d_dw", (x, g)),
            ("embed_bag_fwd", (table, codes, mask)),
            ("embed_bag_bwd", (ge, codes, mask, v)),
        ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--dtype", choices=["float32", "float64"], default="float32")
    args = ap.parse_args()

    ref = load_backend("python")
    try:
        core = load_backend("cython")
    except ImportError:
        print("compiled core not built; only the python backend is available")
        return

    dtype = np.dtype(args.dtype).type
    print(f"dtype={args.dtype} repeat={args.repeat}")
    print(f"{'case':<28} {'op':<16} {'python':>10} {'cython':>10} {'speedup':>8}")
    for tag, ops in cases(dtype):
        for name, op_args in ops:
            t_ref = bench(getattr(ref, name), op_args, args.repeat)
            t_core = bench(getattr(core, name), op_args, args.repeat)
            print(f"{tag:<28} {name:<16} {t_ref * 1e6:>9.1f}u {t_core * 1e6:>9.1f}u "
                  f"{t_ref / t_core:>7.2f}x")


if __name__ == "__main__":
    main()

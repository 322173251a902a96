#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
Both implementations must agree bit-for-bit; the table reports the
per-call time of each and the speedup.
"""

from __future__ import annotations

import argparse
import random
import time

from mqag._kernels import _fallback

try:
    from mqag._kernels import _speedups
except ImportError:
    _speedups = None


def make_cases(seed: int = 7):
    rng = random.Random(seed)

    def dist(k):
        weights = [rng.random() + 1e-3 for _ in range(k)]
        total = sum(weights)
        return tuple(w / total for w in weights)

    pairs4 = [(dist(4), dist(4)) for _ in range(200)]
    pairs16 = [(dist(16), dist(16)) for _ in range(200)]
    seq_a = [rng.randrange(50) for _ in range(400)]
    seq_b = [rng.randrange(50) for _ in range(80)]
    return pairs4, pairs16, seq_a, seq_b


def bench(fn, args_list, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, (time.perf_counter() - start) / len(args_list))
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if _speedups is None:
        print("compiled extension not available; build it with: pip install -e .")
        return 1

    pairs4, pairs16, seq_a, seq_b = make_cases()
    workloads = [
        ("kl_div (K=4)", "kl_div", pairs4),
        ("kl_div (K=16)", "kl_div", pairs16),
        ("total_variation (K=4)", "total_variation", pairs4),
        ("hellinger (K=4)", "hellinger", pairs4),
        ("one_best (K=4)", "one_best", pairs4),
        ("entropy2 (K=4)", "entropy2", [(p,) for p, _ in pairs4]),
        ("lcs_length (400x80)", "lcs_length", [(seq_a, seq_b)] * 5),
    ]

    print(f"{'kernel':<24} {'python':>12} {'cython':>12} {'speedup':>9}")
    for label, name, cases in workloads:
        py_fn = getattr(_fallback, name)
        cy_fn = getattr(_speedups, name)
        for case in cases:
            expected = py_fn(*case)
            got = cy_fn(*case)
            if expected != got:
                raise SystemExit(f"{name}{case}: python={expected!r} cython={got!r}")
        py_t = bench(py_fn, cases, args.repeat)
        cy_t = bench(cy_fn, cases, args.repeat)
        print(f"{label:<24} {py_t * 1e6:>10.2f}us {cy_t * 1e6:>10.2f}us {py_t / cy_t:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

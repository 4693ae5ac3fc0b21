"""Timing comparison of the compiled stencil kernels against the numpy
fallback.

Usage: python benchmarks/bench_kernels.py [--size 512] [--repeats 20]
"""

import argparse
import time

import numpy as np

from elastiseg import _stencils_np as numpy_kernels

try:
    from elastiseg import _stencils as compiled_kernels
except ImportError:
    compiled_kernels = None

KERNELS = ("gradient", "divergence", "shrink", "curvature_weight")


def time_call(fn, args, repeats):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def make_args(name, size, rng):
    phi = rng.random((size, size))
    if name == "gradient":
        return (phi,)
    if name == "divergence":
        return (rng.standard_normal((2, size, size)),)
    if name == "shrink":
        target = rng.standard_normal((2, size, size))
        weight = rng.uniform(0.5, 5.0, (size, size))
        return (target, weight, 20.0)
    return (phi, 3.0, 25.0, 1e-3)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=512, help="grid side length")
    parser.add_argument("--repeats", type=int, default=20, help="timed repetitions")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"grid {args.size}x{args.size}, best of {args.repeats} runs")
    header = f"{'kernel':<18} {'numpy (ms)':>12} {'compiled (ms)':>14} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name in KERNELS:
        call_args = make_args(name, args.size, rng)
        t_np = time_call(getattr(numpy_kernels, name), call_args, args.repeats)
        if compiled_kernels is None:
            print(f"{name:<18} {t_np * 1e3:>12.3f} {'unavailable':>14} {'-':>9}")
            continue
        t_c = time_call(getattr(compiled_kernels, name), call_args, args.repeats)
        out_np = getattr(numpy_kernels, name)(*call_args)
        out_c = getattr(compiled_kernels, name)(*call_args)
        assert np.max(np.abs(out_np - out_c)) <= 1e-12, f"{name}: backends disagree"
        print(f"{name:<18} {t_np * 1e3:>12.3f} {t_c * 1e3:>14.3f} {t_np / t_c:>8.2f}x")


if __name__ == "__main__":
    main()

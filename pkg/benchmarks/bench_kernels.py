"""Benchmark the numba-compiled kernels against the numpy fallbacks.

Run as a script:

    python benchmarks/bench_kernels.py [--size 4096] [--repeats 200]

Reports the best-of-N wall time per call for each kernel on both paths
and the speedup.  Compilation happens before timing (one warm-up call),
so the numbers reflect steady-state cost, not JIT latency.
"""

import argparse
import time

import numpy as np

from splitbreg import kernels


def _inputs(name, n, rng):
    side = max(4, int(np.sqrt(n)))
    if name == "soft_threshold":
        return (rng.standard_normal(n), np.abs(rng.standard_normal(n)))
    if name == "block_shrink":
        m = n - (n % 2)
        return (rng.standard_normal(m), np.abs(rng.standard_normal(m // 2)), 2)
    if name == "grad_dirichlet_1d" or name == "grad_interior_1d":
        return (rng.standard_normal(n), 0.5)
    if name == "neg_div_dirichlet_1d":
        return (rng.standard_normal(n), 0.5)
    if name == "neg_div_interior_1d":
        return (rng.standard_normal(n - 1), 0.5)
    if name == "grad_dirichlet_2d" or name == "grad_interior_2d":
        return (rng.standard_normal(side * side), side, side, 0.5, 0.5)
    if name == "neg_div_dirichlet_2d":
        return (rng.standard_normal(2 * side * side), side, side, 0.5, 0.5)
    if name == "neg_div_interior_2d":
        return (rng.standard_normal(2 * (side - 1) * (side - 1)), side, side, 0.5, 0.5)
    if name == "taut_string_slopes":
        y = rng.standard_normal(n)
        r = np.concatenate([[0.0], np.cumsum(y)])
        lo, hi = r - 0.5, r + 0.5
        lo[0] = hi[0] = r[0]
        lo[-1] = hi[-1] = r[-1]
        return (lo, hi)
    raise ValueError(name)


def _best_of(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=4096)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    if not kernels.NUMBA_ENABLED:
        print("numba path disabled (SPLITBREG_NUMBA=0 or numba missing); "
              "timing the numpy fallback only")

    rng = np.random.default_rng(0)
    header = f"{'kernel':<24}{'numpy (us)':>12}{'numba (us)':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name in sorted(kernels.NUMPY_IMPLS):
        inputs = _inputs(name, args.size, rng)
        np_fn = kernels.NUMPY_IMPLS[name]
        np_fn(*inputs)
        t_np = _best_of(np_fn, inputs, args.repeats)
        if kernels.NUMBA_ENABLED:
            nb_fn = getattr(kernels, name)
            nb_fn(*inputs)  # trigger compilation outside the timed region
            t_nb = _best_of(nb_fn, inputs, args.repeats)
            print(f"{name:<24}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}{t_np / t_nb:>9.2f}")
        else:
            print(f"{name:<24}{t_np * 1e6:>12.1f}{'-':>12}{'-':>9}")


if __name__ == "__main__":
    main()

"""Timing comparison of the numba kernels against the numpy fallback.

Run as:  python benchmarks/kernel_bench.py [--nx 4096] [--nv 64] [--repeat 50]

The same reductions back every entropy/Fisher evaluation, so their cost
dominates the verifier sweeps; numbers are medians over the repeats, with
a first untimed call to absorb JIT compilation.
"""

import argparse
import time

import numpy as np

from hypoflow import kernels
from hypoflow.kernels import _NUMPY_IMPLS


def make_data(nx, nv, d=1, seed=0):
    rng = np.random.default_rng(seed)
    h = np.exp(0.3 * rng.standard_normal((nx, nv)))
    gx = np.ascontiguousarray(rng.standard_normal((d, nx, nv)))
    gv = np.ascontiguousarray(rng.standard_normal((d, nx, nv)))
    hess = np.ascontiguousarray(rng.standard_normal((d, d, nx, nv)))
    wv = rng.random(nv) + 0.1
    wv /= wv.sum()
    pih = h @ wv
    gpi = np.ascontiguousarray(rng.standard_normal((d, nx)))
    fac = rng.random((nx, nv))
    return h, gx, gv, hess, wv, pih, gpi, fac


def median_time(fn, args, repeat):
    fn(*args)  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=4096)
    ap.add_argument("--nv", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()

    h, gx, gv, hess, wv, pih, gpi, fac = make_data(args.nx, args.nv)
    p = 1.5
    cases = [
        ("weighted_mean", (h, wv)),
        ("entropy_log", (h, wv)),
        ("entropy_power", (h, wv, p)),
        ("fisher", (h, gx, gv, wv, p - 2.0)),
        ("weighted_fisher", (h, gx, wv, p - 2.0, fac)),
        ("pi_ratio_x", (h, gx, gpi, pih, wv)),
        ("cross_dissipation", (h, gx, gpi, pih, wv, p)),
        ("quartic", (h, gv, gx, wv, p)),
        ("hessian_norm", (h, hess, gv, gx, wv, p)),
    ]

    if not kernels.HAS_NUMBA:
        print("numba unavailable: only the numpy path can be timed")
        impl_sets = [("numpy", _NUMPY_IMPLS)]
    else:
        from hypoflow.kernels import _NUMBA_IMPLS
        impl_sets = [("numpy", _NUMPY_IMPLS), ("numba", _NUMBA_IMPLS)]

    print(f"grid {args.nx} x {args.nv}, median of {args.repeat} runs")
    print(f"{'kernel':20s}" + "".join(f"{name:>12s}" for name, _ in impl_sets)
          + ("{:>10s}".format("speedup") if len(impl_sets) == 2 else ""))
    for case_name, case_args in cases:
        row = f"{case_name:20s}"
        timings = []
        for _, impls in impl_sets:
            t = median_time(impls[case_name], case_args, args.repeat)
            timings.append(t)
            row += f"{t * 1e3:10.3f}ms"
        if len(timings) == 2:
            row += f"{timings[0] / timings[1]:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()

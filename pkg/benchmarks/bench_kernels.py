"""Wall-time comparison of the numba and pure-numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import math
import time

import numpy as np

from loschmidt import _kernels


def cases():
    rng = np.random.default_rng(0)
    mat = np.ascontiguousarray(rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64)))
    g = 256
    phi = 2 * np.pi * np.arange(g) / g
    w = np.exp(-1j * 1.3 * np.cos(phi)) / g
    return {
        "miller_j n=64 x=40": ("miller_j", (64, 40.0, 140)),
        "miller_i n=64 x=40": ("miller_i", (64, 40.0, 140)),
        "lu_logdet 64x64": ("lu_logdet", (mat,)),
        "brute_sum N=2 grid=256": ("brute_sum", (phi, w, 2, -1, False)),
        "brute_sum N=3 grid=256": ("brute_sum", (phi, w, 3, -1, False)),
    }


def best_time(fn, args, repeat):
    fn(*args)  # compile / warm caches
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.NUMBA_KERNELS is None:
        raise SystemExit("numba is not installed")
    print(f"{'kernel':<26}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for label, (name, call) in cases().items():
        t_np = best_time(_kernels.NUMPY_KERNELS[name], call, args.repeat)
        t_nb = best_time(_kernels.NUMBA_KERNELS[name], call, args.repeat)
        ratio = t_np / t_nb if t_nb > 0 else math.inf
        print(f"{label:<26}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{ratio:>9.1f}x")


if __name__ == "__main__":
    main()

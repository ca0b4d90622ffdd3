"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeats 5]

Prints the median wall time of each kernel per backend and checks that both
backends return identical results on the benchmark inputs.
"""
import argparse
import statistics
import time

import numpy as np

from clusterconquer.kernels import _pykernels

try:
    from clusterconquer.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _time(fn, repeats):
    runs = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs), out


def lloyd_case(mod, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    centers_true = rng.normal(size=(20, 10)) * 3
    points = np.ascontiguousarray(centers_true[rng.integers(0, 20, 4000)] + rng.normal(size=(4000, 10)))
    init = points[rng.choice(4000, 20, replace=False)].copy()
    return lambda: mod.lloyd(points, init.copy(), 300)


def recursion_case(mod, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    m, d, T = 20, 10, 3000
    coef = rng.normal(scale=0.02, size=(m, m * d))
    lags = np.arange(1, d + 1, dtype=np.int64)
    noise = rng.normal(scale=0.01, size=(m, T))
    start = rng.uniform(-1, 1, size=(m, T))

    def run():
        buf = start.copy()
        mod.var_recursion(coef, buf, lags, d, T, noise, -1.0, 1.0, True)
        return buf

    return run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'kernel':<16}{'backend':<10}{'median s':>12}")
    for name, case in (("lloyd", lloyd_case), ("var_recursion", recursion_case)):
        results = {}
        for bname, mod in backends.items():
            secs, out = _time(case(mod), args.repeats)
            results[bname] = out
            print(f"{name:<16}{bname:<10}{secs:>12.5f}")
        if len(results) == 2:
            a, b = results["python"], results["cython"]
            if name == "lloyd":
                same = np.array_equal(a[0], b[0]) and np.allclose(a[1], b[1], rtol=0, atol=1e-12)
            else:
                same = np.allclose(a, b, rtol=0, atol=1e-12)
            print(f"{name:<16}{'agree':<10}{str(same):>12}")


if __name__ == "__main__":
    main()

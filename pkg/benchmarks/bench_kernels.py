"""Time the compiled kernels against the numpy reference implementations.

Run ``python benchmarks/bench_kernels.py [--repeat N]``.  Prints one line
per kernel with the best-of-N wall time of each backend and the speed-up.
"""
import argparse
import timeit

import numpy as np

from multisens import kernels


def cases(rng):
    n = 2000
    f = rng.normal(size=n)
    noise = rng.normal(size=(n, 20 * 100))
    a = np.sort(rng.normal(size=200_000))
    b = np.sort(rng.normal(size=150_000))
    m = 4096
    fA, fB, fAB = rng.normal(size=m), rng.normal(size=m), rng.normal(size=(5, m))
    idx = rng.integers(0, m, size=(100, m)).astype(np.int64)
    return {
        "ou_integrate": lambda k: k.ou_integrate(f, noise, 1.0, 1.0, 1e-2, 1.0, 1e-2, 100, False),
        "ks_statistic": lambda k: k.ks_statistic(a, b),
        "jansen_bootstrap": lambda k: k.jansen_bootstrap(fA, fB, fAB, idx),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    py, cy = kernels.python_backend(), kernels.compiled_backend()
    if cy is None:
        print("compiled kernels are not built; only the numpy backend is timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'numpy [s]':>12}{'cython [s]':>12}{'speed-up':>10}")
    for name, call in cases(rng).items():
        t_py = min(timeit.repeat(lambda: call(py), number=1, repeat=args.repeat))
        if cy is None:
            print(f"{name:<18}{t_py:>12.4f}{'-':>12}{'-':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: call(cy), number=1, repeat=args.repeat))
        print(f"{name:<18}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()

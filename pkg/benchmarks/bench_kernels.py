"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 100 300 1000] [--repeat 5]

Prints the best-of-N wall time for each kernel and backend, the speedup,
and the largest absolute difference between the two results.
"""
import argparse
import timeit

import numpy as np

from kernelseq._backend import compiled_kernels, python_kernels


def cases(n, d, rng):
    A = rng.standard_normal((n, d))
    B = rng.standard_normal((n // 2 + 1, d))
    sigma = 1.3
    labels = rng.integers(0, 3, n)
    i, j = np.triu_indices(n, 1)
    same = labels[i] == labels[j]
    D = python_kernels.sq_dists(A)[i, j]
    sigmas = np.geomspace(0.05, 20.0, 64)
    return {
        "sq_dists": lambda k: k.sq_dists(A),
        "gaussian_gram": lambda k: k.gaussian_gram(A, sigma),
        "cross_gaussian": lambda k: k.cross_gaussian(A, B, sigma),
        "separation_curve": lambda k: k.separation_curve(D[same], D[~same], sigmas),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000])
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if compiled_kernels is None:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'n':>6}{'numpy ms':>11}{'cython ms':>11}{'speedup':>9}{'max diff':>11}")
    for n in args.sizes:
        for name, fn in cases(n, args.dim, rng).items():
            t_py = min(timeit.repeat(lambda: fn(python_kernels), number=1, repeat=args.repeat))
            if compiled_kernels is None:
                print(f"{name:<18}{n:>6}{1e3 * t_py:>11.2f}{'-':>11}{'-':>9}{'-':>11}")
                continue
            t_c = min(timeit.repeat(lambda: fn(compiled_kernels), number=1, repeat=args.repeat))
            diff = np.max(np.abs(np.asarray(fn(python_kernels)) - np.asarray(fn(compiled_kernels))))
            print(f"{name:<18}{n:>6}{1e3 * t_py:>11.2f}{1e3 * t_c:>11.2f}"
                  f"{t_py / t_c:>9.2f}{diff:>11.2e}")


if __name__ == "__main__":
    main()

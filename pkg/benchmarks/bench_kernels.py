#!/usr/bin/env python3
"""Times the hot kernels under the compiled and numpy backends.

Run after `pip install -e .`:

    python benchmarks/bench_kernels.py --height 256 --width 256 --frames 20
"""

import argparse
import time

import numpy as np

from floodkit import _pykernels

try:
    from floodkit import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_backend(impl, args, rng):
    height, width, bands = args.height, args.width, 13
    data = np.ascontiguousarray(rng.normal(0.5, 0.02, size=(height, width, bands)))
    valid = np.ones((height, width), dtype=np.uint8)
    mean = np.ascontiguousarray(rng.normal(0.5, 0.02, size=(height, width, bands)))
    mean_sq_norm = np.einsum("hvd,hvd->hv", mean, mean) + 0.01
    counts = np.full((height, width), 5, dtype=np.int64)

    def run_similarity():
        for _ in range(args.frames):
            impl.similarity_map(data, valid, mean, mean_sq_norm, counts)

    def run_fold():
        m, s, c = mean.copy(), mean_sq_norm.copy(), counts.copy()
        for _ in range(args.frames):
            impl.fold_frame(data, valid, m, s, c)

    prototypes = np.ascontiguousarray(rng.normal(size=(args.prototypes, bands)))
    queries = np.ascontiguousarray(rng.normal(size=(height * width, bands)))

    def run_knn():
        impl.knn_search(queries, prototypes, args.k)

    return {
        f"similarity_map x{args.frames}": timeit(run_similarity),
        f"fold_frame x{args.frames}": timeit(run_fold),
        f"knn {height * width}px/{args.prototypes}protos": timeit(run_knn),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--height", type=int, default=256)
    parser.add_argument("--width", type=int, default=256)
    parser.add_argument("--frames", type=int, default=20)
    parser.add_argument("--prototypes", type=int, default=300)
    parser.add_argument("--k", type=int, default=10)
    args = parser.parse_args()

    backends = {"numpy": _pykernels}
    if _ckernels is not None:
        backends["compiled"] = _ckernels
    else:
        print("compiled extension not built; timing numpy only")

    results = {
        name: bench_backend(impl, args, np.random.default_rng(0))
        for name, impl in backends.items()
    }
    kernels = list(next(iter(results.values())))
    width = max(len(k) for k in kernels)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{n:>10}" for n in results)
    print(header)
    print("-" * len(header))
    for kernel in kernels:
        row = f"{kernel:<{width}}  " + "  ".join(
            f"{results[n][kernel] * 1e3:>8.1f}ms" for n in results
        )
        print(row)
    if "compiled" in results:
        print()
        for kernel in kernels:
            speedup = results["numpy"][kernel] / results["compiled"][kernel]
            print(f"{kernel}: compiled is {speedup:.1f}x the numpy backend")


if __name__ == "__main__":
    main()

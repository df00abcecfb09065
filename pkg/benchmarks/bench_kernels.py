"""Benchmark the compiled kernels against the pure numpy fallbacks.

Times the agglomeration merge loop and the SGD epoch kernel on synthetic
workloads of increasing size, verifies both backends agree, and prints a
speedup table.

    python benchmarks/bench_kernels.py [--sizes 200,500,1000] [--epochs 10]
"""

import argparse
import time

import numpy as np

from cobar.kernels import available_backends


def random_sq_dist(rng, n):
    d = rng.uniform(0.0, 2.0, size=(n, n))
    d = np.triu(d, 1)
    d = d + d.T
    return d**2


def bench_ward(backends, sizes, rng):
    print("\nward merge loop (squared-distance Lance-Williams):")
    print(f"{'n':>6}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for n in sizes:
        d2 = random_sq_dist(rng, n)
        times = {}
        reference = None
        for name, mod in backends.items():
            t0 = time.perf_counter()
            merges, heights = mod.ward_linkage(d2)
            times[name] = time.perf_counter() - t0
            if reference is None:
                reference = (merges, heights)
            else:
                assert np.array_equal(merges, reference[0]), "backends disagree on merges"
                assert np.array_equal(heights, reference[1]), "backends disagree on heights"
        row = f"{n:>6}" + "".join(f"{times[name]:>11.3f}s" for name in backends)
        if len(times) > 1:
            ts = list(times.values())
            row += f"{ts[0] / ts[-1]:>9.1f}x"
        print(row)


def bench_mf(backends, sizes, epochs, rng):
    print(f"\nmatrix-factorization SGD ({epochs} epochs, 10 factors):")
    print(f"{'ratings':>9}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for n_users in sizes:
        n_items = max(50, n_users // 2)
        n_ratings = n_users * 25
        users = rng.integers(0, n_users, n_ratings).astype(np.int32)
        items = rng.integers(0, n_items, n_ratings).astype(np.int32)
        ratings = rng.uniform(0.5, 4.0, n_ratings)
        p0 = rng.normal(0, 0.1, (n_users, 10))
        q0 = rng.normal(0, 0.1, (n_items, 10))
        orders = [rng.permutation(n_ratings) for _ in range(epochs)]
        times = {}
        finals = []
        for name, mod in backends.items():
            p, q = p0.copy(), q0.copy()
            bu, bi = np.zeros(n_users), np.zeros(n_items)
            t0 = time.perf_counter()
            for order in orders:
                mod.mf_sgd_epoch(users, items, ratings, order, p, q, bu, bi, 2.25, 0.01, 0.015)
            times[name] = time.perf_counter() - t0
            finals.append(p)
        if len(finals) > 1:
            assert np.allclose(finals[0], finals[1], atol=1e-8), "backends diverged"
        row = f"{n_ratings:>9}" + "".join(f"{times[name]:>11.3f}s" for name in backends)
        if len(times) > 1:
            ts = list(times.values())
            row += f"{ts[0] / ts[-1]:>9.1f}x"
        print(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="200,500,1000",
                        help="comma-separated problem sizes (default: 200,500,1000)")
    parser.add_argument("--epochs", type=int, default=10, help="SGD epochs per run (default: 10)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    print("available backends:", ", ".join(backends))
    if len(backends) == 1:
        print("(compiled kernels not built; timing the fallback only)")
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)
    bench_ward(backends, sizes, rng)
    bench_mf(backends, sizes, args.epochs, np.random.default_rng(args.seed + 1))


if __name__ == "__main__":
    main()

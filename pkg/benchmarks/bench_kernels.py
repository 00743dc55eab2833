#!/usr/bin/env python3
"""Benchmark the compiled graph kernels against the pure-Python fallback.

Generates random DAGs in CSR form (edge u -> v means "u depends on v",
~`edges-per-node` deps each) and times the four kernels on both backends.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 1000 10000 100000 --repeat 5
"""

import argparse
import random
import time
from array import array

from layerpm import _kernels_py

try:
    from layerpm import _kernels_c
except ImportError:
    _kernels_c = None


def make_dag(rng, n, edges_per_node):
    indptr = array("i", [0])
    indices = array("i")
    for u in range(n):
        k = min(u, rng.randint(0, 2 * edges_per_node))
        deps = sorted(rng.sample(range(u), k)) if k else []
        indices.extend(deps)
        indptr.append(len(indices))
    return indptr, indices


def bench(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        started = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - started)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    parser.add_argument("--edges-per-node", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    if _kernels_c is None:
        print("note: compiled extension not available; timing the fallback only")

    header = f"{'kernel':<16}{'n':>9}{'edges':>10}{'python':>12}{'c':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))

    rng = random.Random(args.seed)
    for n in args.sizes:
        indptr, indices = make_dag(rng, n, args.edges_per_node)
        roots = array("i", sorted(rng.sample(range(n), max(1, n // 20))))
        everything = array("i", range(n))
        kernels = [
            ("closure", lambda mod: mod.closure(n, indptr, indices, roots)),
            ("reverse_closure", lambda mod: mod.reverse_closure(n, indptr, indices, roots)),
            ("lex_topo", lambda mod: mod.lex_topo(n, indptr, indices, everything)),
            ("kahn_layers", lambda mod: mod.kahn_layers(n, indptr, indices, everything)),
        ]
        for name, call in kernels:
            py_time, py_result = bench(lambda: call(_kernels_py), args.repeat)
            if _kernels_c is None:
                print(f"{name:<16}{n:>9}{len(indices):>10}{py_time * 1e3:>10.2f}ms{'-':>12}{'-':>9}")
                continue
            c_time, c_result = bench(lambda: call(_kernels_c), args.repeat)
            assert py_result == c_result, f"backend mismatch in {name} at n={n}"
            print(
                f"{name:<16}{n:>9}{len(indices):>10}"
                f"{py_time * 1e3:>10.2f}ms{c_time * 1e3:>10.2f}ms{py_time / c_time:>8.1f}x"
            )


if __name__ == "__main__":
    main()

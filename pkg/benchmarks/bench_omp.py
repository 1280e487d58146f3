#!/usr/bin/env python3
"""Benchmark the compiled OMP kernel against the numpy fallback.

Runs batch coding at a few problem sizes and prints per-batch wall time for
each importable backend plus the speedup. Also cross-checks that both
backends produce identical supports and matching coefficients.
"""

import argparse
import time

import numpy as np

from specsr.sparse_coding import available_backends


def make_problem(seed, bands, atoms, columns):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((bands, atoms))
    D /= np.linalg.norm(D, axis=0)
    S = rng.standard_normal((bands, columns))
    return np.ascontiguousarray(D), np.ascontiguousarray(S)


def time_backend(kernel, D, S, max_atoms, repeats):
    kernel.omp_batch(D, S, max_atoms, 0.0)  # warm up
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        kernel.omp_batch(D, S, max_atoms, 0.0)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("note: compiled kernel not built; timing the python kernel only")

    sizes = [
        (16, 32, 256, 3),
        (31, 32, 1024, 4),
        (31, 64, 1024, 4),
        (64, 128, 2048, 6),
    ]
    header = f"{'bands':>6} {'atoms':>6} {'cols':>6} {'s':>3}"
    for name in backends:
        header += f" {name + ' (ms)':>14}"
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)

    for bands, atoms, columns, s in sizes:
        D, S = make_problem(0, bands, atoms, columns)
        times = {}
        line = f"{bands:>6} {atoms:>6} {columns:>6} {s:>3}"
        for name, kernel in backends.items():
            times[name] = time_backend(kernel, D, S, s, args.repeats)
            line += f" {times[name] * 1e3:>14.2f}"
        if len(times) == 2:
            line += f" {times['python'] / times['compiled']:>8.1f}x"
        print(line)

    if len(backends) == 2:
        D, S = make_problem(1, 31, 32, 512)
        c_py, s_py = backends["python"].omp_batch(D, S, 4, 0.0)
        c_cy, s_cy = backends["compiled"].omp_batch(D, S, 4, 0.0)
        same_support = [list(a) for a in s_cy] == s_py
        max_diff = float(np.abs(c_py - c_cy).max())
        print(f"\nagreement: supports identical = {same_support}, "
              f"max coefficient diff = {max_diff:.2e}")


if __name__ == "__main__":
    main()

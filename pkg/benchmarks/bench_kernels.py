"""Benchmark the two hot kernels: numba-compiled vs plain-python numpy.

Both execution modes run the same source (see sitelasso._accel): the
compiled kernel keeps its uncompiled original on ``.py_func``. This script
times both on matched inputs, checks they produce the same numbers, and
prints a small table. Run with SITELASSO_DISABLE_NUMBA=1 to confirm the
fallback path is what you would be shipping without numba.

Usage:  python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from sitelasso._accel import NUMBA_ENABLED, py_version
from sitelasso.cd import _cd_sweeps_kernel
from sitelasso.lars import _lar_steps_kernel


def standardized_matrix(rng, n, p):
    X = rng.standard_normal((n, p))
    X -= X.mean(axis=0)
    X /= np.linalg.norm(X, axis=0)
    y = rng.standard_normal(n)
    y -= y.mean()
    return X, y


def best_of(repeats, fn):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_cd(rng, n, p, repeats):
    X, y = standardized_matrix(rng, n, p)
    col_sq = np.sum(X * X, axis=0)
    lam = 0.1 * 2.0 * np.max(np.abs(X.T @ y))

    def run(kernel):
        def call():
            beta = np.zeros(p)
            sweeps = kernel(X, col_sq, y, lam, beta, 200_000, 1e-12)
            return sweeps, beta

        return call

    jit_t, (sweeps, beta_jit) = best_of(repeats, run(_cd_sweeps_kernel))
    py_t, (_, beta_py) = best_of(repeats, run(py_version(_cd_sweeps_kernel)))
    gap = float(np.max(np.abs(beta_jit - beta_py)))
    return f"cd_sweeps {n}x{p} ({sweeps} sweeps)", jit_t, py_t, gap


def bench_lar(rng, n, p, repeats):
    X, y = standardized_matrix(rng, n, p)
    max_active = min(n - 1, p)

    def run(kernel):
        def call():
            return kernel(X, y, 1e-12, max_active, 8 * p + 50)

        return call

    jit_t, out_jit = best_of(repeats, run(_lar_steps_kernel))
    py_t, out_py = best_of(repeats, run(py_version(_lar_steps_kernel)))
    knots = out_jit[2]
    gap = float(
        max(
            np.max(np.abs(out_jit[0] - out_py[0])),
            np.max(np.abs(out_jit[1] - out_py[1])),
        )
    )
    return f"lar_steps {n}x{p} ({knots} knots)", jit_t, py_t, gap


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats, best kept")
    args = parser.parse_args()

    print(f"numba compilation: {'enabled' if NUMBA_ENABLED else 'DISABLED (pure numpy)'}")
    rng = np.random.default_rng(0)

    rows = []
    if NUMBA_ENABLED:  # first calls compile; keep them out of the timings
        wx, wy = standardized_matrix(rng, 30, 10)
        _cd_sweeps_kernel(wx, np.sum(wx * wx, axis=0), wy, 0.5, np.zeros(10), 100, 1e-8)
        _lar_steps_kernel(wx, wy, 1e-12, 9, 50)

    rows.append(bench_cd(rng, 200, 60, args.repeats))
    rows.append(bench_cd(rng, 400, 120, args.repeats))
    rows.append(bench_lar(rng, 200, 60, args.repeats))
    rows.append(bench_lar(rng, 400, 120, args.repeats))

    header = f"{'kernel':<34} {'jit (ms)':>10} {'python (ms)':>12} {'speedup':>8} {'max |diff|':>11}"
    print(header)
    print("-" * len(header))
    for label, jit_t, py_t, gap in rows:
        speed = py_t / jit_t if jit_t > 0 else float("inf")
        print(f"{label:<34} {jit_t * 1e3:>10.2f} {py_t * 1e3:>12.2f} {speed:>7.1f}x {gap:>11.2e}")
        if gap > 1e-9:
            raise SystemExit(f"kernel modes disagree on {label}: {gap}")


if __name__ == "__main__":
    main()

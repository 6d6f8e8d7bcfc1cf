#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the numpy fallback.

Times the three block kernels in isolation and one full solver iteration
loop under each backend.  Run from the repository root:

    python benchmarks/compare_backends.py [--devices N] [--antennas M]
"""

import argparse
from time import perf_counter

import numpy as np

import jadce
from jadce import kernels


def time_call(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = perf_counter()
        fn()
        best = min(best, perf_counter() - t0)
    return best


def bench_kernels(n, m, reps=30):
    rng = np.random.default_rng(0)
    z = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    at = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    xi = np.empty_like(z)
    norms = np.empty(n)
    rows = {}
    for name in kernels.available_backends():
        kernels.set_backend(name)
        rows[name] = {
            "prox_step_dual": time_call(
                lambda: kernels.prox_step_dual(z, at, 0.8, 1.25, xi), reps
            ),
            "prox_step_point": time_call(
                lambda: kernels.prox_step_point(z, 1.25, at, xi), reps
            ),
            "block_norms": time_call(lambda: kernels.block_norms(z, norms), reps),
        }
    return rows


def bench_solver(n, m, iters=60):
    cfg = jadce.InstanceConfig(
        n_devices=n, n_antennas=m, seq_length=10,
        n_active=max(1, n // 40), noise_var=0.01, seed=0,
    )
    problem = jadce.to_problem(jadce.generate(cfg))
    opts = jadce.SolverOptions(tol=1e-300, max_iterations=iters, trace_every=0)
    rows = {}
    for name in kernels.available_backends():
        kernels.set_backend(name)
        jadce.aladin_solve(problem, opts)  # warm-up
        report = jadce.aladin_solve(problem, opts)
        per_iter = report.parallel_s + report.consensus_s
        rows[name] = float(np.median(per_iter[5:])) * 1e3
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--devices", type=int, default=2000)
    parser.add_argument("--antennas", type=int, default=100)
    args = parser.parse_args()

    print(f"backends available: {kernels.available_backends()}")
    print(f"problem size: {args.devices} devices x {args.antennas} antennas\n")

    kernel_rows = bench_kernels(args.devices, args.antennas)
    names = sorted(kernel_rows)
    print(f"{'kernel':<18}" + "".join(f"{n:>14}" for n in names) + f"{'speedup':>10}")
    for kern in ("prox_step_dual", "prox_step_point", "block_norms"):
        times = [kernel_rows[n][kern] for n in names]
        ratio = times[names.index('python')] / times[names.index('compiled')] if (
            'compiled' in names
        ) else float('nan')
        print(
            f"{kern:<18}"
            + "".join(f"{t * 1e6:>12.1f}us" for t in times)
            + f"{ratio:>9.2f}x"
        )

    solver_rows = bench_solver(args.devices, args.antennas)
    print(f"\n{'full iteration':<18}" + "".join(f"{solver_rows[n]:>12.3f}ms" for n in names))
    if "compiled" in solver_rows:
        print(f"{'iteration speedup':<18}{solver_rows['python'] / solver_rows['compiled']:>13.2f}x")
    kernels.set_backend("compiled" if "compiled" in kernels.available_backends() else "python")


if __name__ == "__main__":
    main()

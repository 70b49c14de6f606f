"""Timing comparison of the compiled and pure-Python simulation kernels.

Runs the same workloads through both implementations in one process
(importing them directly, bypassing the import-time backend choice) and
reports wall-clock times and speedups.

Usage:
    python3 benchmarks/bench_kernels.py [--steps N] [--queries N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import sitdyn._fallback as fallback
from sitdyn import ModelParams, build_cloud, calibrate_capacity, steady_states
from sitdyn.dynamics import nsfd_scheme, pack_params

try:
    import sitdyn._kernel as kernel
except ImportError:
    kernel = None


def default_params() -> ModelParams:
    p = ModelParams(
        egg_lay_rate=10.0,
        capacity=1.0,
        egg_maturation_rate=0.05,
        egg_death_rate=0.03,
        male_death_rate=0.1,
        female_death_rate=0.04,
        sterile_death_rate=0.12,
        female_fraction=0.49,
        mate_encounter_rate=1e-3,
        sterile_competitiveness=1.0,
    )
    return p.with_capacity(calibrate_capacity(p, 5106.0))


def timed(label: str, fn, *args) -> float:
    start = time.perf_counter()
    fn(*args)
    elapsed = time.perf_counter() - start
    print(f"  {label:<14} {elapsed * 1e3:9.2f} ms")
    return elapsed


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--queries", type=int, default=200_000)
    args = ap.parse_args()

    p = default_params()
    pv = pack_params(p)
    scheme = nsfd_scheme(p)
    wild = steady_states(p).wild
    state0 = np.array([wild.eggs, wild.males, 0.0, wild.females, 0.0])

    backends = [("pure", fallback)]
    if kernel is not None:
        backends.append(("compiled", kernel))
    else:
        print("compiled kernel unavailable; timing the pure backend only")

    results: dict[str, dict[str, float]] = {}

    print(f"\nrun_steps: {args.steps} scheme steps")
    for name, mod in backends:
        buf = state0.copy()
        results.setdefault("run_steps", {})[name] = timed(
            name, mod.run_steps, buf, args.steps, 100.0, scheme.step_weight, pv, True
        )

    print("\nentry_steps: suppression run until basin entry")
    cloud = build_cloud(p, mesh_n=12)
    for name, mod in backends:
        buf = state0.copy()
        buf[2] = 60_000.0
        results.setdefault("entry_steps", {})[name] = timed(
            name,
            mod.entry_steps,
            buf,
            scheme.step_weight,
            pv,
            False,
            0.0,
            0.0,
            0,
            0,
            scheme.max_steps,
            cloud.points,
            cloud.children,
            cloud.root,
        )

    print(f"\nquery_many: {args.queries} dominance-tree lookups")
    rng = np.random.default_rng(0)
    queries = rng.uniform(0.0, 1.5, size=(args.queries, 3)) * np.array(
        [wild.eggs, wild.males, wild.females]
    )
    out_ref = None
    for name, mod in backends:
        out = mod.query_many(cloud.points, cloud.children, cloud.root, queries)
        results.setdefault("query_many", {})[name] = timed(
            name, mod.query_many, cloud.points, cloud.children, cloud.root, queries
        )
        if out_ref is None:
            out_ref = out
        elif not np.array_equal(np.asarray(out_ref), np.asarray(out)):
            raise SystemExit("backend disagreement in query_many")

    if kernel is not None:
        print("\nspeedups (pure / compiled):")
        for workload, times in results.items():
            print(f"  {workload:<14} {times['pure'] / times['compiled']:8.1f}x")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Compare the compiled kernel backend against the pure-numpy fallback.

Times the hot paths (value-table construction, batched per-block decisions,
end-to-end planning and simulation) on the reference configuration and
checks that both backends agree numerically.

Usage: python benchmarks/bench_kernels.py [--quick]
"""
import argparse
import time
from contextlib import contextmanager

import numpy as np

import mecoffload._kernels as kernels
from mecoffload import dp, model, sim
from mecoffload._kernels import pykernels
from mecoffload.channel import make_channel

try:
    from mecoffload._kernels import _cykernels as cykernels
except ImportError:
    cykernels = None

TASK = model.TaskProfile(deadline=0.02, data=4e4, cycles_per_nat=40.0,
                         local_cpu_cap=0.5e9, cpu_coeff=1e-23)
EDGE = model.EdgeProfile(cpu=1e9)
RADIO = model.RadioProfile(bandwidth=1e6, block=2e-3)
CHAN = make_channel(100.0)


@contextmanager
def backend(impl):
    saved = (kernels.BACKEND, kernels.golden_batch, kernels.stage_update,
             kernels.stage_update_discrete)
    kernels.BACKEND = impl.BACKEND_NAME
    kernels.golden_batch = impl.golden_batch
    kernels.stage_update = impl.stage_update
    kernels.stage_update_discrete = impl.stage_update_discrete
    try:
        yield
    finally:
        (kernels.BACKEND, kernels.golden_batch, kernels.stage_update,
         kernels.stage_update_discrete) = saved


def timed(fn, repeats):
    best = np.inf
    value = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def bench_table_build(grid_size):
    t1 = model.last_block_time(4e4, TASK, EDGE, RADIO)
    table = dp.build_value_tables(4e4, t1, 10, grid_size, CHAN.rule, RADIO)
    return table.stage_values[-1, -1]


def bench_decisions(table, d, h):
    send, val = dp.decide_batch(table, 5, d, h)
    return float(val.sum())


def bench_plan():
    return dp.expected_offload_energy(3.3e4, TASK, EDGE, RADIO, CHAN)


def bench_simulate(episodes):
    res = sim.monte_carlo(4e4, episodes, TASK, EDGE, RADIO, CHAN, seed=7)
    return res.mean_energy


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()
    if cykernels is None:
        raise SystemExit("compiled backend not built; run pip install -e . first")

    grid = 257 if args.quick else 513
    episodes = 1_000 if args.quick else 5_000
    batch = 20_000 if args.quick else 100_000
    repeats = 2 if args.quick else 3

    t1 = model.last_block_time(4e4, TASK, EDGE, RADIO)
    with backend(cykernels):
        table = dp.build_value_tables(4e4, t1, 10, grid, CHAN.rule, RADIO)
    rng = np.random.default_rng(0)
    d_batch = rng.uniform(0.0, 4e4, batch)
    h_batch = rng.uniform(0.5, 5000.0, batch)

    cases = [
        (f"value table build (G={grid}, K=64, N=10)", lambda: bench_table_build(grid), repeats),
        (f"decision batch ({batch} states, stage 5)",
         lambda: bench_decisions(table, d_batch, h_batch), repeats),
        ("end-to-end expected offload energy", bench_plan, repeats),
        (f"monte carlo ({episodes} episodes)", lambda: bench_simulate(episodes), 1),
    ]

    print(f"{'case':45s} {'python':>10s} {'cython':>10s} {'speedup':>8s} {'rel dev':>9s}")
    for name, fn, reps in cases:
        with backend(pykernels):
            t_py, v_py = timed(fn, reps)
        with backend(cykernels):
            t_cy, v_cy = timed(fn, reps)
        scale = max(abs(v_py), abs(v_cy), 1e-300)
        rel = abs(v_py - v_cy) / scale
        print(f"{name:45s} {t_py*1e3:9.1f}ms {t_cy*1e3:9.1f}ms {t_py/t_cy:7.1f}x {rel:9.2e}")
        if rel > 1e-9:
            raise SystemExit(f"backend disagreement on {name}: {rel:.3e}")
    print("backends agree on every case (rel dev <= 1e-9)")


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-Python trial kernels on identical workloads.

    python benchmarks/bench_kernels.py [--trials N] [--repeat R]
"""
import argparse
import time

import numpy as np

from gatesim import kernels
from gatesim.attacker import _scenario_traces, reset_wait
from gatesim.gadgets import EarlyExitConfig, MoEConfig, pack_traces
from gatesim.power_gate import default_table
from gatesim.stats import make_rng


def workload(scenario, trials, seed=0):
    rng = make_rng(seed)
    secrets = rng.integers(0, 2, trials)
    kinds, durs, offsets = pack_traces(_scenario_traces(scenario, secrets, rng))
    th, lat = default_table().kernel_arrays()
    return kinds, durs, offsets, th, lat


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels.compiled_simulate_trials is None:
        raise SystemExit("compiled kernel not built (or GATESIM_PURE is set); nothing to compare")

    table = default_table()
    cases = [
        ("moe probe", MoEConfig(), kernels.PROBE_AT_OFFSET, MoEConfig().effective_probe_offset),
        ("early-exit probe", EarlyExitConfig(), kernels.PROBE_AFTER_END, 1000),
        ("moe end-to-end", MoEConfig(), kernels.PROBE_NONE, 0),
    ]
    print(f"{'workload':<18} {'events':>9} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, sc, mode, param in cases:
        k, d, o, th, lat = workload(sc, args.trials)
        call = (k, d, o, th, lat, reset_wait(table.deepest, table), mode, param, False, 0, kernels.NEVER)
        tp, rp = best_of(kernels.python_simulate_trials, call, args.repeat)
        tc, rc = best_of(kernels.compiled_simulate_trials, call, args.repeat)
        assert all(np.array_equal(a, b) for a, b in zip(rp[:2], rc[:2])) and rp[2:] == rc[2:]
        print(f"{name:<18} {len(k):>9} {tp:>10.4f} {tc:>10.4f} {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()

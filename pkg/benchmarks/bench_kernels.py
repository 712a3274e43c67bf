"""Time the compiled kernels against the numpy fallback on representative inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the median time per call and the speed-up.
"""

import argparse
import statistics
import time

import numpy as np

from fdsecrecy._backend import available_backends, get_kernels
from fdsecrecy.inputs import EtInputDistribution
from fdsecrecy.model import FadingGrid, SystemParams


def _cases():
    rng = np.random.default_rng(0)
    params = SystemParams()
    grid = FadingGrid.from_params(params, 8)
    dist = EtInputDistribution.symmetric_pairs(
        np.array([0.5, 1.5]) * np.sqrt(params.p_et), [0.5, 0.25], len(grid.v))
    powers = np.full(dist.points.shape, 1e-9)
    n_slots = 100_000
    e_act = rng.exponential(1.0, n_slots)
    e_sil = rng.exponential(0.9, n_slots)
    cost = np.full(n_slots, 0.95)
    c = 10 ** rng.uniform(4, 6, 256)
    return {
        "mixture_entropy (5 comps)": lambda k: k.mixture_entropy(
            np.array([-2.0, -0.5, 0.0, 0.7, 3.0]), np.full(5, 0.2),
            np.array([1.0, 0.5, 2.0, 1.0, 0.8]), 1e-13),
        "binary_unit_entropy (64 alphas)": lambda k: k.binary_unit_entropy(
            np.linspace(0.01, 8.0, 64), 1e-13),
        "leakage_sum (8x8x8 grid, 5 points)": lambda k: k.leakage_sum(
            np.ascontiguousarray(dist.points), np.ascontiguousarray(dist.probs), powers,
            grid.v.probs, np.sqrt(grid.g.gains), grid.g.probs, grid.f.gains, grid.f.probs,
            params.sigma3_sq, 1e-13),
        "power_roots (256 gains)": lambda k: k.power_roots(
            c, 1e4, grid.f.gains, grid.f.probs, params.sigma3_sq, 1),
        "battery_run (1e5 slots)": lambda k: k.battery_run(e_act, e_sil, cost, 0.0, np.inf),
    }


def _time(fn, repeat):
    fn()  # warm up
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()
    names = available_backends()
    print(f"backends: {', '.join(names)}")
    print(f"{'kernel':38s}" + "".join(f"{n:>14s}" for n in names) + "   speed-up")
    for label, case in _cases().items():
        times = {n: _time(lambda: case(get_kernels(n)), args.repeat) for n in names}
        row = f"{label:38s}" + "".join(f"{times[n] * 1e3:12.3f}ms" for n in names)
        if len(names) == 2:
            row += f"   {times['python'] / times['compiled']:7.1f}x"
        print(row)


if __name__ == "__main__":
    main()

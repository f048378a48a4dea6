"""Compare the compiled and numpy transport kernels on the default channel.

    python benchmarks/bench_transport.py [--photons N] [--receivers R] [--repeat K]

Both backends score the same photon batches; the script checks that their
tallies agree before reporting throughput.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from stulc.pipeline import build_channel, lattice
from stulc.scenario import Scenario
from stulc.underwater import available_backends, run_transport


def receivers(n: int, half_width: float) -> np.ndarray:
    side = max(1, int(round(n**0.5)))
    xs = lattice(side, half_width)
    X, Y = np.meshgrid(xs, xs)
    return np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])


def timed(fn, repeat: int):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--photons", type=int, default=16384)
    p.add_argument("--receivers", type=int, default=64)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    ch = build_channel(Scenario({"fading.mode": "mean", "grid.m": 40}))
    rec = receivers(args.receivers, ch.spot_radius)
    backends = available_backends()
    results = {}
    print(f"photons={args.photons} receivers={len(rec)} orders={ch.setup.params.n_orders}")
    for name in backends:
        t, tally = timed(lambda: run_transport(ch.setup, args.photons, 7, rec, backend=name), args.repeat)
        results[name] = (t, tally)
        rate = args.photons * len(rec) / t
        print(f"{name:>7}: {t:8.3f} s  {rate / 1e6:8.2f} M photon-receiver scores/s")
    if len(results) == 2:
        (tc, a), (tp, b) = results["cython"], results["python"]
        rel = np.max(np.abs(a.total_power - b.total_power) / np.maximum(np.abs(b.total_power), 1e-300))
        print(f"speedup cython/python: {tp / tc:.1f}x   max relative power difference: {rel:.2e}")


if __name__ == "__main__":
    main()

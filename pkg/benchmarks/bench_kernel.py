"""Compare the compiled and numpy Monte Carlo kernels.

    python benchmarks/bench_kernel.py --states 2000000 --repeat 3
"""
import argparse
import json
import time

import numpy as np

from hdqkd import montecarlo as mc
from hdqkd.link import IntensitySettings, LinkParams
from hdqkd.montecarlo.rng import stream_key
from hdqkd.montecarlo.tables import build_tables


def time_backend(backend, key, states, tables, repeat):
    best = float("inf")
    counts = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        counts = mc.simulate_block(key, 0, states, tables, backend)
        best = min(best, time.perf_counter() - t0)
    return best, counts


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--states", type=int, default=2_000_000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--length-km", type=float, default=50.0)
    p.add_argument("--dimension", type=int, default=4, choices=(2, 4))
    p.add_argument("--json", action="store_true", help="print results as JSON")
    args = p.parse_args(argv)

    settings = IntensitySettings(0.5, 0.18, 0.78, 0.3)
    tables = build_tables(settings, LinkParams(length_km=args.length_km), args.dimension)
    key = stream_key(1)
    results, counts = {}, {}
    for backend in mc.available_backends():
        dt, counts[backend] = time_backend(backend, key, args.states, tables, args.repeat)
        results[backend] = {"seconds": dt, "ns_per_state": dt / args.states * 1e9}
    ref = next(iter(counts.values()))
    identical = all(np.array_equal(ref, c) for c in counts.values())
    if "cython" in results:
        results["speedup"] = results["numpy"]["seconds"] / results["cython"]["seconds"]
    results["counters_identical"] = identical

    if args.json:
        print(json.dumps(results, indent=2))
        return
    print(f"{args.states} states, {args.dimension}D, {args.length_km:g} km, best of {args.repeat}")
    for backend in mc.available_backends():
        r = results[backend]
        print(f"  {backend:7s} {r['seconds']:8.3f} s  {r['ns_per_state']:8.1f} ns/state")
    if "speedup" in results:
        print(f"  speedup {results['speedup']:.1f}x")
    print(f"  counters identical: {identical}")


if __name__ == "__main__":
    main()

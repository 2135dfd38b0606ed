"""Compare the compiled and pure-Python BFS kernels on constellation-sized topologies.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 100 500 1584]
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from isltopo.feasibility import FeasibilityConfig, snapshot_candidates
from isltopo.heuristic import initial_topology
from isltopo.kernels import implementations
from isltopo.orbit import ConstellationConfig, build_constellation

# (planes, sats per plane) per satellite count
SHAPES = {100: (10, 10), 500: (25, 20), 1584: (72, 22)}


def topology_csr(n_sats: int, seed: int = 0):
    n_planes, spp = SHAPES[n_sats]
    cfg = ConstellationConfig(n_planes, spp, 550.0, math.radians(53.0), math.pi / 4)
    c = build_constellation(cfg, seed)
    es = snapshot_candidates(c, 0.0, FeasibilityConfig(3500.0))
    topo = initial_topology(es, 4, np.random.default_rng(seed))
    return topo.csr()


def best_of(fn, repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--sizes", type=int, nargs="+", default=sorted(SHAPES), choices=sorted(SHAPES))
    args = p.parse_args(argv)

    impls = implementations()
    if "cython" not in impls:
        print("compiled backend not built; only the Python timings are shown")
    print(f"{'N':>6} {'backend':>8} {'eccentricities':>16} {'speedup':>8}")
    for n in args.sizes:
        indptr, indices = topology_csr(n)
        times = {}
        reference = None
        for name, mod in impls.items():
            ecc = mod.eccentricities(indptr, indices, n)
            if reference is None:
                reference = np.asarray(ecc)
            elif not np.array_equal(reference, np.asarray(ecc)):
                raise SystemExit(f"backends disagree at N={n}")
            times[name] = best_of(lambda: mod.eccentricities(indptr, indices, n), args.repeat)
        for name, t in times.items():
            speedup = times["python"] / t
            print(f"{n:>6} {name:>8} {t * 1e3:>13.2f} ms {speedup:>7.1f}x")


if __name__ == "__main__":
    main()

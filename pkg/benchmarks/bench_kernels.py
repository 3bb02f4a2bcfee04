"""Wall-clock comparison of the compiled and pure-Python single-path integrators.

Usage: python benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from heatchain import BACKEND
from heatchain.integrators import simulate
from heatchain.models import exchange, pinned, unpinned
from heatchain.potentials import PotentialSpec

CASES = {
    "pinned harmonic N=8": lambda: pinned(8, PotentialSpec("harmonic", "harmonic-pinning", alpha=1.0), 1.0, 2.0),
    "pinned FPU N=8": lambda: pinned(8, PotentialSpec("fpu", "quartic-pinning", alpha=0.5), 1.0, 2.0),
    "unpinned FPU N=8": lambda: unpinned(8, PotentialSpec("fpu"), 1.0, 2.0),
    "exchange N=8": lambda: exchange(8, 1.0, 1.0, 2.0),
}


def best_time(fn, repeat: int) -> float:
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if BACKEND != "cython":
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'case':<22} {'scheme':<10} {'python s':>10} {'cython s':>10} {'speedup':>8} {'max|diff|':>10}")
    for name, make in CASES.items():
        m = make()
        x0 = np.full(m.dim, 0.1)
        for scheme in ("euler", "splitting"):
            run = {b: (lambda b=b: simulate(m, x0, 1e-3, args.steps, 1, scheme, 100, backend=b))
                   for b in ("python", "cython")}
            tp, tc = best_time(run["python"], args.repeat), best_time(run["cython"], args.repeat)
            diff = float(np.max(np.abs(run["python"]().states - run["cython"]().states)))
            print(f"{name:<22} {scheme:<10} {tp:>10.3f} {tc:>10.4f} {tp / tc:>8.0f} {diff:>10.1e}")


if __name__ == "__main__":
    main()

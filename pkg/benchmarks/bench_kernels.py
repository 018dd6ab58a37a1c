"""Compiled vs pure-Python orbit enumeration.

    python3 benchmarks/bench_kernels.py [--nmax 14] [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from qgraph import _pykernels
from qgraph.library import complete_graph, tadpole
from qgraph.orbits import _successor_arrays
from qgraph.scattering import QuantumMapEvaluator

try:
    from qgraph import _kernels
except ImportError:  # extension not built
    _kernels = None


def arrays(g):
    ev = QuantumMapEvaluator(g)
    return _successor_arrays(ev.S(), g.index.lengths, 2 * g.n_bonds)


def timed(fn, args, repeat):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nmax", type=int, default=14)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    cases = [("tadpole", tadpole(1.0, math.sqrt(2)), a.nmax),
             ("K4", complete_graph(4, [1 + 0.1 * math.sqrt(p) for p in (2, 3, 5, 6, 7, 10)]), max(4, a.nmax - 4))]
    print(f"{'graph':8s} {'n_max':>5s} {'orbits':>9s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for name, g, n in cases:
        args = (*arrays(g), n, math.inf, 10 ** 8, False)
        tp, (_, npy, *_rest) = timed(_pykernels.primitive_orbits, args, 1)
        if _kernels is None:
            print(f"{name:8s} {n:5d} {len(npy):9d} {tp:10.3f} {'n/a':>10s} {'n/a':>8s}")
            continue
        tc, (_, ncy, *_rest) = timed(_kernels.primitive_orbits, args, a.repeat)
        assert np.array_equal(np.sort(npy), np.sort(ncy))
        print(f"{name:8s} {n:5d} {len(ncy):9d} {tp:10.3f} {tc:10.4f} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()

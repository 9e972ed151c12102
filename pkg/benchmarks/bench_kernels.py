"""Compare the compiled element kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--level 16] [--repeat 5]

Kernel inputs are taken from a real disk mesh so array sizes match what
assembly sees.  Prints one line per kernel with the best-of-N time of each
backend, the speedup and the max abs difference of the outputs.
"""

import argparse
import timeit

import numpy as np

from navslip import _kernels_py
from navslip.discretization import FunctionSpace
from navslip.geometry import DomainSpec, build_mesh_level

try:
    from navslip import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None


def inputs(level):
    space = FunctionSpace(build_mesh_level(DomainSpec.disk(), level))
    q = space.quadrature()
    rng = np.random.default_rng(0)
    wq = np.ascontiguousarray(rng.standard_normal(q.grad.shape[:2] + (2,)))
    return space, q, wq


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--level", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the numpy backend is available")
        return 1
    space, q, wq = inputs(args.level)
    print(f"disk level {args.level}: {len(space.mesh.cells)} cells, {q.weights.shape[1]} points per cell")
    cases = {
        "local_mass": (q.phi, q.weights),
        "local_gradgrad": (q.grad, q.weights),
        "local_symgrad": (q.grad, q.weights),
        "local_div": (q.grad, q.pbasis, q.weights),
        "local_convection": (q.phi, q.grad, q.weights, wq),
    }
    print(f"{'kernel':<18}{'cython [ms]':>12}{'numpy [ms]':>12}{'speedup':>9}{'max diff':>11}")
    for name, a in cases.items():
        fc, fp = getattr(compiled, name), getattr(_kernels_py, name)
        tc = min(timeit.repeat(lambda: fc(*a), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fp(*a), number=1, repeat=args.repeat))
        diff = float(np.abs(np.asarray(fc(*a)) - fp(*a)).max())
        print(f"{name:<18}{1e3 * tc:>12.2f}{1e3 * tp:>12.2f}{tp / tc:>9.1f}{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

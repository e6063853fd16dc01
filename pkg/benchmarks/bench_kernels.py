"""Compare the numba and numpy paths of the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints the best wall time of each path and the relative difference of the
results.  The first numba call per signature includes compilation (or a cache
load) and is excluded.
"""

import argparse
import time

import numpy as np

from cancelkit.lab import _kernels
from cancelkit.lab.experiments import square_curve
from cancelkit.lab.fields import bump, mollifier_mass_constant
from cancelkit.lab.grid import TorusGrid


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def gagliardo_case(size):
    g = TorusGrid(2, size)
    u = bump(g, g.center, 0.24, power=2.0)
    idx = np.stack(np.meshgrid(*([np.arange(size)] * 2), indexing="ij"), -1).reshape(-1, 2)
    args = (u.flat, idx, size, g.h, 4 / 3, 2 + 0.5 * 4 / 3)
    return (lambda: _kernels.gagliardo_rows_numba(*args).sum(),
            lambda: _kernels.gagliardo_rows_numpy(*args).sum())


def splat_case(size, per_side=4000):
    g = TorusGrid(2, size)
    c = square_curve()
    t = (np.arange(per_side) + 0.5) / per_side
    pts = np.concatenate([a + t[:, None] * (b - a) for a, b in zip(c[:-1], c[1:])])
    w = np.concatenate([np.repeat(((b - a) / per_side)[None], per_side, 0) for a, b in zip(c[:-1], c[1:])])
    args = (pts, w, size, g.h, 1 / 16, 1 / mollifier_mass_constant(2))
    return (lambda: _kernels.splat_numba(*args), lambda: _kernels.splat_numpy(*args))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<22}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'rel diff':>12}")
    cases = [(f"gagliardo N={n}", gagliardo_case(n)) for n in (24, 32, 48)]
    cases += [(f"splat N={n}", splat_case(n)) for n in (128, 256)]
    for name, (jit, ref) in cases:
        jit()  # compile or load from cache
        tj, a = best_of(jit, args.repeat)
        tn, b = best_of(ref, args.repeat)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b)))
        print(f"{name:<22}{tj:>12.4f}{tn:>12.4f}{tn / tj:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()

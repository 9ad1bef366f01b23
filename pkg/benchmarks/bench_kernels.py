"""Benchmark the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [N]

Runs every hot kernel at a representative size with both backends and
prints a timing table. The compiled extension must be built (pip install)
for the comparison to be meaningful; otherwise both columns time the
fallback.
"""

import sys
import time

import numpy as np

from devpic.kernels import _numpy_impl

try:
    from devpic.kernels import _cy_impl
except ImportError:
    _cy_impl = None


def timeit(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 10**6
    rng = np.random.default_rng(0)

    va = rng.standard_normal((n, 3))
    vb = rng.standard_normal((n, 3))
    delta = 0.05 * rng.standard_normal(n)
    phi = rng.uniform(0, 2 * np.pi, n)

    coords = rng.uniform(0, 2 * np.pi, (n, 3))

    x = rng.uniform(0, 4 * np.pi, n)
    v = rng.standard_normal((n, 3))
    cells = _numpy_impl.cell_index(x, 4 * np.pi, 100)
    E = rng.standard_normal(100)

    n_poly = 400
    packed = rng.standard_normal((n_poly, 24))
    packed[:, 3] = 1.0 + rng.random(n_poly)
    xi = np.stack(np.meshgrid(*[np.linspace(-5, 5, 21)] * 3, indexing="ij"), -1).reshape(-1, 3)

    cases = [
        ("scatter_pairs", (va, vb, delta, phi)),
        ("deposit_ngp", (coords, 1e-5, 32)),
        ("cell_index", (x, 4 * np.pi, 100)),
        ("cell_moments", (cells, v, 100)),
        ("kick_drift", (x.copy(), v.copy(), E[cells], 1e-3, 4 * np.pi)),
        ("poly_probe_max", (packed, xi, 1.2)),
    ]

    print(f"N = {n} (poly_probe_max: {n_poly} cells x {xi.shape[0]} probes)")
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}")
    for name, args in cases:
        t_np = timeit(getattr(_numpy_impl, name), *args)
        if _cy_impl is not None:
            t_cy = timeit(getattr(_cy_impl, name), *args)
            print(f"{name:<16}{t_np*1e3:>12.2f}{t_cy*1e3:>13.2f}{t_np/t_cy:>9.2f}")
        else:
            print(f"{name:<16}{t_np*1e3:>12.2f}{'n/a':>13}{'n/a':>9}")


if __name__ == "__main__":
    main()

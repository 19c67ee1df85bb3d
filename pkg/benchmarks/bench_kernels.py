"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--scale 1.0] [--repeat 3]

Both implementations are imported directly, so the D2DKIT_NUMBA flag does
not matter here. The first numba call (compilation or cache load) is
excluded from the timings.
"""

import argparse
import time

import numpy as np

from d2dkit.kernels import IMPLEMENTATIONS
from d2dkit.synthgen import ring_lattice_rewire


def _csr(n, a, b):
    rows = np.concatenate([a, b])
    cols = np.concatenate([b, a])
    order = np.lexsort((cols, rows))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return indptr, cols[order].astype(np.int64)


def workloads(scale: float, rng):
    n_cc = int(200_000 * scale)
    src = rng.integers(0, n_cc, size=n_cc).astype(np.int64)
    dst = rng.integers(0, n_cc, size=n_cc).astype(np.int64)
    keep = src != dst
    yield "component_labels", (n_cc, src[keep], dst[keep])

    n_sw = max(50, int(2000 * scale))
    edges = ring_lattice_rewire(n_sw, 6, 0.1, rng)
    indptr, indices = _csr(n_sw, edges[:, 0], edges[:, 1])
    yield "bfs_stats", (indptr, indices, np.arange(n_sw, dtype=np.int64))
    yield "triangles_per_node", (indptr, indices)

    m = int(500_000 * scale)
    a = rng.integers(0, n_sw, size=m).astype(np.int64)
    b = (a + rng.integers(1, n_sw, size=m)) % n_sw
    yield "replay", (a, b, np.ones(m, dtype=bool), rng.random(m), 0.3, 0, n_sw)


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    opts = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'numba s':>12}{'numpy s':>12}{'speedup':>10}")
    for name, args in workloads(opts.scale, rng):
        nb = IMPLEMENTATIONS["numba"][name]
        npf = IMPLEMENTATIONS["numpy"][name]
        nb(*args)  # warm-up
        t_nb = best_of(nb, args, opts.repeat)
        t_np = best_of(npf, args, opts.repeat)
        print(f"{name:<20}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()

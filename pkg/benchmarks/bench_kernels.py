"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run directly:  python benchmarks/bench_kernels.py
The fallback path is the one selected when UGSOS_NO_NUMBA=1 is set; here both
implementations are timed in-process so the comparison shares all setup.
"""
import time

import numpy as np

from ugsos import _kernels
from ugsos.graphs import johnson_graph
from ugsos.instances import plant_instance


def time_fn(fn, *args, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_brute_force():
    g = johnson_graph(6, 2, 0.5)
    inst, _ = plant_instance(g, 3, 0.1, seed=0)
    eu, ev, w, s = inst._arrays
    n, k = inst.num_vertices, inst.k
    t_np, r_np = time_fn(_kernels._brute_force_scan_py, eu, ev, w, s, n, k)
    rows = [("numpy", t_np, r_np)]
    if _kernels.HAS_NUMBA:
        _kernels._brute_force_scan_nb(eu, ev, w, s, n, k)  # compile
        t_nb, r_nb = time_fn(_kernels._brute_force_scan_nb, eu, ev, w, s, n, k)
        rows.append(("numba", t_nb, r_nb))
        assert r_np == r_nb
    return "brute_force_scan (k^14 states)", rows


def bench_subset_scan():
    rng = np.random.default_rng(0)
    n = 18
    W = rng.random((n, n))
    W = (W + W.T) / 2
    np.fill_diagonal(W, 0.0)
    deg = W.sum(axis=1)
    import itertools
    combos = np.array(list(itertools.combinations(range(n), 6)), dtype=np.int64)
    t_np, r_np = time_fn(_kernels._subset_cut_scan_py, combos, W, deg)
    rows = [("numpy", t_np, r_np)]
    if _kernels.HAS_NUMBA:
        _kernels._subset_cut_scan_nb(combos, W, deg)  # compile
        t_nb, r_nb = time_fn(_kernels._subset_cut_scan_nb, combos, W, deg)
        rows.append(("numba", t_nb, r_nb))
        assert np.allclose(r_np, r_nb)
    return f"subset_cut_scan ({len(combos)} subsets)", rows


def main():
    if not _kernels.HAS_NUMBA:
        print("numba unavailable (or UGSOS_NO_NUMBA set); "
              "timing the numpy path only\n")
    for name, rows in (bench_brute_force(), bench_subset_scan()):
        print(name)
        base = rows[0][1]
        for label, t, _ in rows:
            speedup = f"  ({base / t:.1f}x vs numpy)" if label != "numpy" else ""
            print(f"  {label:<6} {t * 1e3:9.2f} ms{speedup}")
        print()


if __name__ == "__main__":
    main()

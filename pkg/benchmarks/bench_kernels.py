"""Compiled vs pure-numpy timings of the direct-summation kernels.

    python3 benchmarks/bench_kernels.py [--sources 32768] [--targets 200] [--repeat 3] [--json out.json]

Each kernel runs once untimed per backend (JIT warm-up), then ``repeat``
times; the best wall time is reported together with the max relative
difference between the two backends.
"""
import argparse
import json
import os
import time

import numpy as np

from weakflow import _accel
from weakflow.kernels import laplace_sum, pair_ratio_max, stokes_sum


def _timed(fn, repeat):
    fn()
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _with_backend(flag, fn, repeat):
    old = os.environ.get("WEAKFLOW_NUMBA")
    os.environ["WEAKFLOW_NUMBA"] = flag
    try:
        return _timed(fn, repeat)
    finally:
        if old is None:
            os.environ.pop("WEAKFLOW_NUMBA", None)
        else:
            os.environ["WEAKFLOW_NUMBA"] = old


def cases(n_src, n_tgt, seed=0):
    rng = np.random.default_rng(seed)
    src = rng.uniform(-1, 1, (n_src, 3))
    tgt = rng.normal(size=(n_tgt, 3))
    tgt *= (3 + rng.uniform(0, 5, (n_tgt, 1))) / np.linalg.norm(tgt, axis=1, keepdims=True)
    q = rng.normal(size=n_src)
    dip = rng.normal(size=(n_src, 3))
    force = rng.normal(size=(n_src, 3))
    stress = rng.normal(size=(n_src, 9))
    n = 32
    vals = rng.normal(size=n ** 3)
    ia = rng.integers(0, n ** 3, 200_000)
    ib = rng.integers(0, n ** 3, 200_000)
    return {
        "laplace_sum": lambda: laplace_sum(src, q, dip, tgt),
        "stokes_sum": lambda: stokes_sum(src, force, stress, tgt),
        "pair_ratio_max": lambda: pair_ratio_max(vals, ia, ib, n, 2 * np.pi / n, 0.25),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sources", type=int, default=32 ** 3)
    ap.add_argument("--targets", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()

    threads = _accel.apply_thread_setting()
    print(f"numba available: {_accel.HAS_NUMBA}, threads: {threads}")
    print(f"{'kernel':<16}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max rel diff':>15}")
    rows = []
    for name, fn in cases(args.sources, args.targets).items():
        t_nb, a = _with_backend("1", fn, args.repeat)
        t_np, b = _with_backend("0", fn, args.repeat)
        a, b = np.asarray(a), np.asarray(b)
        diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb, "max_rel_diff": diff})
        print(f"{name:<16}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}{diff:>15.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"sources": args.sources, "targets": args.targets, "threads": threads, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()

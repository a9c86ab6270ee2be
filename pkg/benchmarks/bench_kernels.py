#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the pure-Python fallback.

Times the two hot paths (batched event-table transfer used by resonance
scans, and the adaptive order-8 piece stepper) on identical inputs and
reports the speedup.  Run after `pip install -e .`:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from bvschro import _kernels_py

try:
    from bvschro import _kernels
except ImportError:
    _kernels = None

EVENTS = np.array([
    # kind, width, alpha, beta, b, V, extra, pad
    [0.0, 0.8, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 2.0, 0.0],
    [0.0, 0.6, 1.0, 1.0, 0.5, -4.0, 0.0, 0.0],
    [0.0, 0.6, 1.2, 0.9, 0.0, 1.5, 0.0, 0.0],
    [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, -0.7, 0.0],
    [0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
])


def bench_events(mod, n_lam=20000, repeats=3):
    lams = np.linspace(1.0, 50.0, n_lam) - 0.35j
    zs = lams * lams
    y0 = np.vstack([np.ones_like(lams), -1j * lams])
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        y, logs = mod.propagate_events(EVENTS, y0, zs, 1.0)
        best = min(best, time.perf_counter() - t0)
    return best, y, logs


def bench_rk8(mod, n_calls=200, repeats=3):
    ca = np.array([1.0, 0.1, 0.0, 0.02])
    cb = np.array([1.0])
    cbb = np.array([0.3, -0.2])
    cV = np.array([-2.0, 0.0, 1.0])
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        for k in range(n_calls):
            z = complex(1.0 + 0.01 * k, 0.05)
            out = mod.rk8_piece(ca, cb, cbb, cV, -1.0, 1.0, 1.0 + 0j, 0.3j, z, 0.5)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    print(f"pure-Python backend ({_kernels_py.BACKEND})")
    t_py_ev, y_py, l_py = bench_events(_kernels_py)
    print(f"  propagate_events (20k lam, 6 events): {t_py_ev * 1e3:8.1f} ms")
    t_py_rk, o_py = bench_rk8(_kernels_py)
    print(f"  rk8_piece        (200 cubic pieces):  {t_py_rk * 1e3:8.1f} ms")
    if _kernels is None:
        print("compiled backend not available")
        return
    print(f"compiled backend ({_kernels.BACKEND})")
    t_cy_ev, y_cy, l_cy = bench_events(_kernels)
    print(f"  propagate_events (20k lam, 6 events): {t_cy_ev * 1e3:8.1f} ms"
          f"   speedup x{t_py_ev / t_cy_ev:.1f}")
    t_cy_rk, o_cy = bench_rk8(_kernels)
    print(f"  rk8_piece        (200 cubic pieces):  {t_cy_rk * 1e3:8.1f} ms"
          f"   speedup x{t_py_rk / t_cy_rk:.1f}")
    ev_err = float(np.max(np.abs(y_py - y_cy)) + np.max(np.abs(l_py - l_cy)))
    rk_err = max(abs(o_py[0] - o_cy[0]), abs(o_py[1] - o_cy[1]))
    print(f"backend agreement: events {ev_err:.2e}, rk8 {rk_err:.2e}")


if __name__ == "__main__":
    main()

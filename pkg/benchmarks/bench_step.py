#!/usr/bin/env python3
"""Benchmark the compiled stepper/Adam kernels against the numpy fallback.

Run: python benchmarks/bench_step.py
"""

import time

import numpy as np

from accwave._kernels import cython_backend, numpy_backend
from accwave.model import TrafficParams, equilibrium


def time_fn(fn, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def main():
    p = TrafficParams()
    eq = equilibrium(p)
    n = 201
    rho = np.full(n, eq.rho_bar) + 0.01 * np.cos(np.linspace(0, 8 * np.pi, n))
    v = p.q_in / rho
    h = np.full(n, p.h_acc_bar)
    args = (0.1, 5.0, p.l, p.q_in, p.alpha, p.tau_acc, p.tau_m, p.h_m)
    sargs = (p.alpha, p.tau_acc, p.tau_m, p.h_m)

    backends = [("numpy", numpy_backend)]
    cy = cython_backend()
    if cy is not None:
        backends.append(("cython", cy))
    else:
        print("compiled kernel not built; benchmarking the fallback only")

    reps = 20000
    print(f"PDE step kernel, M+1 = {n} nodes ({reps} reps):")
    base = None
    for name, impl in backends:
        dt = time_fn(lambda: impl.step_kernel(rho, v, h, *args), reps)
        base = base or dt
        print(f"  {name:7s} {dt * 1e6:9.2f} us/step   x{base / dt:.1f}")

    print(f"CFL wave-speed scan ({reps} reps):")
    base = None
    for name, impl in backends:
        dt = time_fn(lambda: impl.max_wave_speed(rho, v, h, *sargs), reps)
        base = base or dt
        print(f"  {name:7s} {dt * 1e6:9.2f} us/scan   x{base / dt:.1f}")

    m = 2_841_606  # parameter count of the reference actor network
    theta = np.random.default_rng(0).normal(size=m)
    mom_m = np.zeros(m)
    mom_v = np.zeros(m)
    g = np.random.default_rng(1).normal(size=m)
    reps = 30
    print(f"fused Adam update, {m} parameters ({reps} reps):")
    base = None
    for name, impl in backends:
        dt = time_fn(lambda: impl.adam_fused(theta, mom_m, mom_v, g, 1e-3,
                                             0.9, 0.999, 1e-8, 0.1, 1e-3), reps)
        base = base or dt
        print(f"  {name:7s} {dt * 1e3:9.2f} ms/update x{base / dt:.1f}")


if __name__ == "__main__":
    main()

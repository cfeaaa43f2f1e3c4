"""Evaluation metrics over completed traces.

Index integrals use density in veh/km with length in m and time in s — the
convention that reproduces the reference magnitudes (equilibrium total
travel time ~3.2e7 over a 300 s window on the 1 km segment).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EquilibriumPoint
from .sim import Trace

__all__ = [
    "PerfIndices",
    "l2_norms",
    "accel_field",
    "fuel_rate",
    "indices",
    "improvement_percent",
]

# Fuel-rate coefficients, as printed in the source (the b3 term multiplies v;
# fuel_model="cubic" switches it to the v^3 form of the cited model).
B0 = 25e-3
B1 = 24.5e-6
B3 = 32.5e-9
B4 = 125e-6

RHO_PER_KM = 1000.0  # veh/m -> veh/km for index reporting


@dataclass(frozen=True)
class PerfIndices:
    j_ttt: float      # veh/km * m * s
    j_fuel: float
    j_comfort: float
    horizon: float    # s


def l2_norms(state, eq: EquilibriumPoint) -> tuple:
    """Root-mean-square deviation of (rho, v) from equilibrium."""
    n = state.rho.shape[-1]
    rho_n = float(np.sqrt(np.sum((state.rho - eq.rho_bar) ** 2, axis=-1) / n))
    v_n = float(np.sqrt(np.sum((state.v - eq.v_bar) ** 2, axis=-1) / n))
    return rho_n, v_n


def _ddt(f: np.ndarray, dt: float) -> np.ndarray:
    """Central differences in time, one-sided at the ends."""
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * dt)
    out[0] = (f[1] - f[0]) / dt
    out[-1] = (f[-1] - f[-2]) / dt
    return out


def _ddx(f: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty_like(f)
    out[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * dx)
    out[:, 0] = (f[:, 1] - f[:, 0]) / dx
    out[:, -1] = (f[:, -1] - f[:, -2]) / dx
    return out


def accel_field(trace: Trace) -> np.ndarray:
    """Material acceleration a = v_t + v * v_x on the trace grid."""
    if len(trace.times) < 2:
        raise ValueError("need at least two time steps to differentiate")
    dt = float(trace.times[1] - trace.times[0])
    dx = float(trace.x[1] - trace.x[0])
    return _ddt(trace.v, dt) + trace.v * _ddx(trace.v, dx)


def fuel_rate(v, a, fuel_model: str = "paper"):
    """max(0, b0 + b1*v + b3*v + b4*v*a); 'cubic' uses b3*v**3 instead."""
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    if fuel_model == "paper":
        base = B0 + B1 * v + B3 * v + B4 * v * a
    elif fuel_model == "cubic":
        base = B0 + B1 * v + B3 * v**3 + B4 * v * a
    else:
        raise ValueError(f"unknown fuel model {fuel_model!r}")
    out = np.maximum(0.0, base)
    return out if out.ndim else float(out)


def indices(trace: Trace, window: float = 300.0,
            fuel_model: str = "paper") -> PerfIndices:
    """Trapezoidal space-time integrals of rho, xi*rho and (a^2+a_t^2)*rho
    over [0, L] x [0, window]."""
    dt = float(trace.times[1] - trace.times[0])
    n_t = int(round(window / dt)) + 1
    if n_t > len(trace.times):
        raise ValueError(
            f"evaluation window {window} s exceeds the trace horizon "
            f"{trace.times[-1]:.6g} s")
    sub = Trace(
        times=trace.times[:n_t], x=trace.x,
        rho=trace.rho[:n_t], v=trace.v[:n_t],
        h_applied=trace.h_applied[:n_t], h_commanded=trace.h_commanded[:n_t],
        clamp_counts=trace.clamp_counts[:n_t],
    )
    rho_km = sub.rho * RHO_PER_KM
    a = accel_field(sub)
    a_t = _ddt(a, dt)
    xi = fuel_rate(sub.v, a, fuel_model)

    def integrate(f2d):
        return float(np.trapezoid(np.trapezoid(f2d, dx=float(sub.x[1] - sub.x[0]),
                                               axis=1), dx=dt))

    return PerfIndices(
        j_ttt=integrate(rho_km),
        j_fuel=integrate(xi * rho_km),
        j_comfort=integrate((a * a + a_t * a_t) * rho_km),
        horizon=float(sub.times[-1]),
    )


def improvement_percent(baseline: float, value: float) -> float:
    """Relative improvement of ``value`` over ``baseline`` in percent."""
    if baseline == 0.0:
        return 0.0
    return 100.0 * (baseline - value) / baseline

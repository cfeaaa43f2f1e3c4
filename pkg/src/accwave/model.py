"""Closed-form relations of the mixed ACC/manual ARZ-type traffic model.

All quantities are SI internally: densities in veh/m, speeds in m/s, time
gaps and time constants in s. Inflow is veh/s (configs may give veh/h and
convert once at load).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "TrafficParams",
    "EquilibriumPoint",
    "InfeasibleEquilibriumError",
    "tau_mix",
    "h_mix",
    "v_mix",
    "dv_mix_drho",
    "flow_q",
    "equilibrium",
    "char_speeds",
]


class InfeasibleEquilibriumError(ValueError):
    """Raised when the requested inflow admits no positive equilibrium speed."""


@dataclass(frozen=True)
class TrafficParams:
    """Physical and model constants of the road segment.

    q_in is veh/s. ``h_min``/``h_max`` bound the actuated time gap; they are
    artifact-level clamp bounds (not in the source table) and default to a
    range that brackets both h_m and h_acc_bar.
    """

    L: float = 1000.0          # road length (m)
    l: float = 5.0             # average effective vehicle length (m)
    q_in: float = 1200.0 / 3600.0  # inflow (veh/s)
    alpha: float = 0.15        # ACC penetration ratio
    tau_acc: float = 2.0       # ACC time constant (s)
    tau_m: float = 60.0        # manual time constant (s)
    h_m: float = 1.0           # manual time gap (s)
    h_acc_bar: float = 1.5     # equilibrium ACC time gap (s)
    v_f: float = 30.0          # free-flow speed (m/s); config default, not from the table
    D: float = 0.0             # input delay (s)
    h_min: float = 0.5         # actuation clamp lower bound (s)
    h_max: float = 3.0         # actuation clamp upper bound (s)

    def __post_init__(self):
        if self.L <= 0 or self.l <= 0 or self.q_in <= 0:
            raise ValueError("L, l and q_in must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.tau_acc <= 0 or self.tau_m <= 0:
            raise ValueError("time constants must be positive")
        if self.h_m <= 0 or self.h_acc_bar <= 0:
            raise ValueError("time gaps must be positive")
        if self.D < 0:
            raise ValueError("input delay must be nonnegative")
        if self.v_f <= 0:
            raise ValueError("free-flow speed must be positive")
        if not self.h_min < min(self.h_m, self.h_acc_bar):
            raise ValueError("h_min must lie below min(h_m, h_acc_bar)")
        if not self.h_max > max(self.h_m, self.h_acc_bar):
            raise ValueError("h_max must lie above max(h_m, h_acc_bar)")

    def with_alpha(self, alpha: float) -> "TrafficParams":
        """Copy with a different ACC penetration (used by disturbance runs)."""
        return replace(self, alpha=float(alpha))

    @property
    def rho_jam(self) -> float:
        """Jam density 1/l (veh/m)."""
        return 1.0 / self.l


@dataclass(frozen=True)
class EquilibriumPoint:
    rho_bar: float    # veh/m
    v_bar: float      # m/s
    h_mix_bar: float  # s

    def __post_init__(self):
        if self.rho_bar <= 0 or self.v_bar <= 0:
            raise ValueError("equilibrium density and speed must be positive")


def tau_mix(alpha: float, tau_acc: float, tau_m: float) -> float:
    """Mixed relaxation time 1 / (alpha/tau_acc + (1-alpha)/tau_m)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if tau_acc <= 0 or tau_m <= 0:
        raise ValueError("time constants must be positive")
    return 1.0 / (alpha / tau_acc + (1.0 - alpha) / tau_m)


def h_mix(h_acc, params: TrafficParams):
    """Mixed time gap of the ACC/manual fleet for a commanded gap ``h_acc``.

    Accepts scalars or arrays. The result lies between min(h_acc, h_m) and
    max(h_acc, h_m) for any penetration.
    """
    h_acc = np.asarray(h_acc, dtype=float)
    if np.any(h_acc <= 0):
        raise ValueError("h_acc must be positive")
    kappa = params.tau_acc / params.tau_m
    num = params.alpha + (1.0 - params.alpha) * kappa
    den = params.alpha + (1.0 - params.alpha) * kappa * h_acc / params.h_m
    out = num / den * h_acc
    return out if out.ndim else float(out)


def v_mix(rho, h_acc, params: TrafficParams):
    """Equilibrium speed (1/h_mix) * (1/rho - l); positive iff rho < 1/l."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("rho must be positive")
    out = (1.0 / h_mix(h_acc, params)) * (1.0 / rho - params.l)
    return out if out.ndim else float(out)


def dv_mix_drho(rho, h_acc, params: TrafficParams):
    """Analytic d v_mix / d rho = -1 / (h_mix * rho^2); always negative."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("rho must be positive")
    out = -1.0 / (h_mix(h_acc, params) * rho**2)
    return out if out.ndim else float(out)


def flow_q(rho, h_mix_val, params: TrafficParams):
    """Piecewise fundamental diagram: v_f*rho below the critical density,
    (1 - l*rho)/h_mix above it. Continuous at rho_c = 1/(l + h_mix*v_f)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(rho > 1.0 / params.l):
        raise ValueError("rho must lie in [0, 1/l]")
    rho_c = 1.0 / (params.l + h_mix_val * params.v_f)
    out = np.where(rho <= rho_c, params.v_f * rho, (1.0 - params.l * rho) / h_mix_val)
    return out if out.ndim else float(out)


def equilibrium(params: TrafficParams) -> EquilibriumPoint:
    """Uniform steady state for the configured inflow and gap setpoint.

    v_bar = l / (1/q_in - h_mix_bar), rho_bar = 1 / (l + h_mix_bar*v_bar);
    the flux identity rho_bar*v_bar = q_in is algebraically implied.
    """
    h_mix_bar = float(h_mix(params.h_acc_bar, params))
    inv_q = 1.0 / params.q_in
    if inv_q <= h_mix_bar:
        raise InfeasibleEquilibriumError(
            f"1/q_in = {inv_q:.6g} s must exceed h_mix_bar = {h_mix_bar:.6g} s "
            "for a positive equilibrium speed"
        )
    v_bar = params.l / (inv_q - h_mix_bar)
    rho_bar = 1.0 / (params.l + h_mix_bar * v_bar)
    return EquilibriumPoint(rho_bar=rho_bar, v_bar=v_bar, h_mix_bar=h_mix_bar)


def char_speeds(rho, v, h_acc, params: TrafficParams):
    """Characteristic speeds (lam1, lam2) = (v, v - 1/(h_mix*rho)).

    lam2 < lam1 always since the subtracted term is positive.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("rho must be positive")
    v = np.asarray(v, dtype=float)
    lam1 = v
    lam2 = v - 1.0 / (h_mix(h_acc, params) * rho)
    if lam1.ndim or lam2.ndim:
        return lam1, lam2
    return float(lam1), float(lam2)

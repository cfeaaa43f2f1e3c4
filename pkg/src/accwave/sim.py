"""Finite-difference time stepping of the traffic PDE system.

First-order upwind on the non-conservative form, explicit Euler in time.
The density equation is upwinded by the sign of lam1 = v, the velocity
equation by the sign of lam2 = v - 1/(h_mix*rho); the relaxation source is
applied explicitly. Boundary closure: density extrapolated from the nearest
interior node at both ends, inlet speed pinned to q_in/rho, outlet speed
integrated through the relaxation ODE.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import EquilibriumPoint, TrafficParams, equilibrium

__all__ = [
    "Grid",
    "TrafficState",
    "DelayBuffer",
    "Trace",
    "CflError",
    "PositivityError",
    "make_grid",
    "initial_state",
    "step",
    "apply_boundaries",
    "simulate",
    "write_trace_csv",
    "read_trace_csv",
    "write_norms_csv",
]

TRACE_SCHEMA = "accwave-trace-v1"
NORMS_SCHEMA = "accwave-norms-v1"

# Amplitude of the stop-and-go seed perturbation (veh/m); 10 veh/km.
INITIAL_WAVE_AMPLITUDE = 0.010


class CflError(RuntimeError):
    """Wave speeds exceed the dx/dt bound for the current state."""


class PositivityError(RuntimeError):
    """A state update left the physical region (rho in (0, 1/l), v > 0)."""


@dataclass(frozen=True)
class Grid:
    M: int          # number of spatial cells (M+1 nodes)
    dx: float       # m
    N_steps: int    # steps per horizon
    dt: float       # s
    delay_steps: int  # d = D/dt

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.dx

    @property
    def horizon(self) -> float:
        return self.N_steps * self.dt


@dataclass
class TrafficState:
    rho: np.ndarray  # veh/m, length M+1
    v: np.ndarray    # m/s, length M+1
    t: float = 0.0

    def copy(self) -> "TrafficState":
        return TrafficState(self.rho.copy(), self.v.copy(), self.t)


class DelayBuffer:
    """FIFO realizing the d-step actuation delay.

    The queue is pre-filled with ``fill`` so that the plant receives a
    defined input before the first commanded profile has aged d steps.
    With d = 0 the buffer is a pass-through.
    """

    def __init__(self, d: int, fill: np.ndarray):
        if d < 0:
            raise ValueError("delay step count must be nonnegative")
        self.d = d
        self.fill = np.asarray(fill, dtype=float).copy()
        self._q = deque(self.fill.copy() for _ in range(d))

    def __len__(self) -> int:
        return len(self._q)

    def push_pop(self, current: np.ndarray) -> np.ndarray:
        """Push the newest commanded profile, return the d-steps-old one."""
        if self.d == 0:
            return current
        self._q.append(np.asarray(current, dtype=float))
        return self._q.popleft()


def make_grid(params: TrafficParams, dx: float, dt: float, horizon: float,
              worst_case_speed: float | None = None) -> Grid:
    """Validate divisibility and the construction-time CFL bound.

    ``worst_case_speed`` defaults to the free-flow speed; dx/dt below it is
    rejected outright (the per-step guard still applies during stepping).
    """
    if dx <= 0 or dt <= 0 or horizon <= 0:
        raise ValueError("dx, dt and horizon must be positive")
    m = params.L / dx
    if abs(m - round(m)) > 1e-9:
        raise ValueError(f"road length {params.L} m is not divisible by dx = {dx} m")
    d = params.D / dt
    if abs(d - round(d)) > 1e-9:
        raise ValueError(f"input delay {params.D} s is not divisible by dt = {dt} s")
    n = horizon / dt
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"horizon {horizon} s is not divisible by dt = {dt} s")
    bound = params.v_f if worst_case_speed is None else worst_case_speed
    if dx / dt < bound:
        raise ValueError(
            f"dx/dt = {dx / dt:.3g} m/s is below the worst-case speed bound "
            f"{bound:.3g} m/s; refine dt"
        )
    return Grid(M=int(round(m)), dx=dx, N_steps=int(round(n)), dt=dt,
                delay_steps=int(round(d)))


def initial_state(params: TrafficParams, eq: EquilibriumPoint, grid: Grid,
                  amplitude: float = INITIAL_WAVE_AMPLITUDE) -> TrafficState:
    """Stop-and-go seed: rho_bar + A*cos(8*pi*x/L), v = q_in/rho."""
    x = grid.x
    rho = eq.rho_bar + amplitude * np.cos(8.0 * np.pi * x / params.L)
    if np.any(rho <= 0.0) or np.any(rho >= params.rho_jam):
        raise ValueError("initial density leaves (0, 1/l); reduce the amplitude")
    v = params.q_in / rho
    return TrafficState(rho=rho, v=v, t=0.0)


def _check_positive(rho: np.ndarray, v: np.ndarray, params: TrafficParams, t: float):
    if not (np.all(rho > 0.0) and np.all(rho < params.rho_jam) and np.all(v > 0.0)):
        raise PositivityError(
            f"state left the physical region at t = {t:.2f} s "
            f"(rho range [{rho.min():.4g}, {rho.max():.4g}], v min {v.min():.4g})"
        )


def step(state: TrafficState, delayed_input: np.ndarray, params: TrafficParams,
         grid: Grid) -> TrafficState:
    """Advance one dt. Raises CflError before touching the state if the
    per-node |lam1| + |lam2| bound exceeds dx/dt."""
    smax = _kernels.max_wave_speed(state.rho, state.v, delayed_input,
                                   params.alpha, params.tau_acc, params.tau_m,
                                   params.h_m)
    if grid.dx / grid.dt < smax:
        raise CflError(
            f"CFL violated at t = {state.t:.2f} s: max |lam1|+|lam2| = "
            f"{smax:.4g} m/s exceeds dx/dt = {grid.dx / grid.dt:.4g} m/s"
        )
    rho_n, v_n = _kernels.step_kernel(
        state.rho, state.v, np.asarray(delayed_input, dtype=float),
        grid.dt, grid.dx, params.l, params.q_in,
        params.alpha, params.tau_acc, params.tau_m, params.h_m,
    )
    t_new = state.t + grid.dt
    _check_positive(rho_n, v_n, params, t_new)
    return TrafficState(rho=rho_n, v=v_n, t=t_new)


def apply_boundaries(state: TrafficState, delayed_input: np.ndarray,
                     params: TrafficParams, grid: Grid) -> TrafficState:
    """Boundary closure alone (the interior is assumed already updated).

    Exposed separately for testing; ``step`` fuses it with the interior
    update. Note the outlet ODE uses the pre-closure v at node M.
    """
    from .model import h_mix as _h_mix
    from .model import tau_mix as _tau_mix

    rho = state.rho.copy()
    v = state.v.copy()
    M = grid.M
    rho[0] = rho[1]
    rho[M] = rho[M - 1]
    v[0] = params.q_in / rho[0]
    tau = _tau_mix(params.alpha, params.tau_acc, params.tau_m)
    V_M = (1.0 / _h_mix(delayed_input[M], params)) * (1.0 / rho[M] - params.l)
    v[M] = state.v[M] + (grid.dt / tau) * (V_M - state.v[M])
    if not (np.all(rho > 0.0) and np.all(v > 0.0)):
        raise PositivityError(f"boundary closure produced a nonpositive value "
                              f"at t = {state.t:.2f} s")
    return TrafficState(rho=rho, v=v, t=state.t)


@dataclass
class Trace:
    """Space-time record of one simulation run."""

    times: np.ndarray          # (n_t,)
    x: np.ndarray              # (M+1,)
    rho: np.ndarray            # (n_t, M+1)
    v: np.ndarray              # (n_t, M+1)
    h_applied: np.ndarray      # (n_t, M+1); row k = input applied during step k
    h_commanded: np.ndarray    # (n_t, M+1); row k = controller output at step k
    clamp_counts: np.ndarray   # (n_t,); clamped nodes per commanded profile
    diverged: bool = False
    diverged_at: float | None = None

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


def simulate(controller, params: TrafficParams, grid: Grid, horizon: float | None = None,
             eq: EquilibriumPoint | None = None,
             initial: TrafficState | None = None,
             alpha_sampler=None) -> Trace:
    """Run the closed loop for ``horizon`` seconds and record the full trace.

    ``controller`` maps (state, h_prev, eq, params) -> commanded profile (it
    is responsible for its own clamping; clamp counting is done here against
    [h_min, h_max]). ``alpha_sampler``, if given, is called once per step and
    returns the plant-side ACC penetration for that step. Divergence is
    recorded as a truncated, flagged trace rather than an exception.
    """
    if eq is None:
        eq = equilibrium(params)
    n = grid.N_steps if horizon is None else int(round(horizon / grid.dt))
    state = initial.copy() if initial is not None else initial_state(params, eq, grid)

    nx = grid.M + 1
    h_bar = np.full(nx, params.h_acc_bar)
    buf = DelayBuffer(grid.delay_steps, fill=h_bar)
    h_prev = h_bar.copy()

    times = np.empty(n + 1)
    rho_rec = np.empty((n + 1, nx))
    v_rec = np.empty((n + 1, nx))
    h_app_rec = np.empty((n + 1, nx))
    h_cmd_rec = np.empty((n + 1, nx))
    clamp_rec = np.zeros(n + 1, dtype=int)

    times[0] = state.t
    rho_rec[0] = state.rho
    v_rec[0] = state.v
    h_app_rec[0] = h_bar
    h_cmd_rec[0] = h_bar

    diverged = False
    diverged_at = None
    k_done = 0
    for k in range(n):
        h_cmd = controller(state, h_prev, eq, params)
        clamp_rec[k + 1] = int(np.count_nonzero(
            (h_cmd <= params.h_min) | (h_cmd >= params.h_max)))
        h_app = buf.push_pop(h_cmd)
        step_params = params if alpha_sampler is None else params.with_alpha(alpha_sampler())
        try:
            state = step(state, h_app, step_params, grid)
        except (PositivityError, CflError):
            diverged = True
            diverged_at = state.t
            break
        h_prev = h_cmd
        times[k + 1] = state.t
        rho_rec[k + 1] = state.rho
        v_rec[k + 1] = state.v
        h_app_rec[k + 1] = h_app
        h_cmd_rec[k + 1] = h_cmd
        k_done = k + 1

    end = k_done + 1
    return Trace(
        times=times[:end], x=grid.x, rho=rho_rec[:end], v=v_rec[:end],
        h_applied=h_app_rec[:end], h_commanded=h_cmd_rec[:end],
        clamp_counts=clamp_rec[:end], diverged=diverged, diverged_at=diverged_at,
    )


def write_trace_csv(trace: Trace, path, t_stride: int = 1, x_stride: int = 1):
    """Emit the (t, x) trace table with the published schema header."""
    with open(path, "w") as f:
        f.write(f"# schema={TRACE_SCHEMA}\n")
        f.write("t,x,rho,v,h_acc_applied,h_acc_commanded\n")
        for k in range(0, len(trace.times), t_stride):
            t = trace.times[k]
            for j in range(0, len(trace.x), x_stride):
                f.write(f"{t:.6g},{trace.x[j]:.6g},{trace.rho[k, j]:.10g},"
                        f"{trace.v[k, j]:.10g},{trace.h_applied[k, j]:.10g},"
                        f"{trace.h_commanded[k, j]:.10g}\n")


def read_trace_csv(path) -> Trace:
    """Load a trace table written by :func:`write_trace_csv`."""
    with open(path) as f:
        header = f.readline().strip()
        if not header.startswith("# schema="):
            raise ValueError(f"{path}: missing schema header")
        schema = header.split("=", 1)[1]
        if schema != TRACE_SCHEMA:
            raise ValueError(f"{path}: unsupported trace schema {schema!r}")
        cols = f.readline().strip().split(",")
        expect = ["t", "x", "rho", "v", "h_acc_applied", "h_acc_commanded"]
        if cols != expect:
            raise ValueError(f"{path}: unexpected columns {cols}")
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    t_vals = np.unique(data[:, 0])
    x_vals = np.unique(data[:, 1])
    n_t, n_x = len(t_vals), len(x_vals)
    if n_t * n_x != data.shape[0]:
        raise ValueError(f"{path}: rows do not form a full (t, x) grid")
    order = np.lexsort((data[:, 1], data[:, 0]))
    data = data[order]
    shape = (n_t, n_x)
    return Trace(
        times=t_vals, x=x_vals,
        rho=data[:, 2].reshape(shape), v=data[:, 3].reshape(shape),
        h_applied=data[:, 4].reshape(shape), h_commanded=data[:, 5].reshape(shape),
        clamp_counts=np.zeros(n_t, dtype=int),
    )


def write_norms_csv(trace: Trace, eq: EquilibriumPoint, path):
    """Per-step L2 deviation norms of rho and v."""
    n = len(trace.x)
    rho_norm = np.sqrt(np.sum((trace.rho - eq.rho_bar) ** 2, axis=1) / n)
    v_norm = np.sqrt(np.sum((trace.v - eq.v_bar) ** 2, axis=1) / n)
    with open(path, "w") as f:
        f.write(f"# schema={NORMS_SCHEMA}\n")
        f.write("t,rho_l2,v_l2\n")
        for k in range(len(trace.times)):
            f.write(f"{trace.times[k]:.6g},{rho_norm[k]:.10g},{v_norm[k]:.10g}\n")

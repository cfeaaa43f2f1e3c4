"""Controllers mapping traffic state to commanded time-gap profiles.

The three-gain law applies scalar gains to the previous-input, velocity and
density deviation profiles:

    h = h_bar - eta1*(h_prev - h_bar) + eta2*(v - v_bar) + eta3*(rho - rho_bar)

clamped to [h_min, h_max]. The velocity term enters with a positive sign:
where traffic runs slow (v < v_bar) the commanded gap shrinks, raising the
local equilibrium speed — the damping direction for the congestion wave.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EquilibriumPoint, TrafficParams

__all__ = [
    "GainAction",
    "gain_feedback",
    "OpenLoopController",
    "FixedGainController",
    "PpoPolicyController",
    "open_loop",
]


@dataclass(frozen=True)
class GainAction:
    """Scalar feedback gains; eta1 is dimensionless, eta2 carries s^2/m,
    eta3 carries s*m/veh."""

    eta1: float
    eta2: float
    eta3: float

    def __post_init__(self):
        if not all(np.isfinite([self.eta1, self.eta2, self.eta3])):
            raise ValueError("gains must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.eta1, self.eta2, self.eta3])


def gain_feedback(prev_input: np.ndarray, state, eq: EquilibriumPoint,
                  gains: GainAction, params: TrafficParams) -> np.ndarray:
    """Evaluate the three-gain law per node and clamp to [h_min, h_max]."""
    h = (params.h_acc_bar
         - gains.eta1 * (prev_input - params.h_acc_bar)
         + gains.eta2 * (state.v - eq.v_bar)
         + gains.eta3 * (state.rho - eq.rho_bar))
    return np.clip(h, params.h_min, params.h_max)


def open_loop(state, eq: EquilibriumPoint, params: TrafficParams) -> np.ndarray:
    """Constant setpoint profile, independent of the state."""
    return np.full(state.rho.shape[0], params.h_acc_bar)


class OpenLoopController:
    kind = "open_loop"

    def __call__(self, state, h_prev, eq, params):
        return open_loop(state, eq, params)


class FixedGainController:
    """Constant-gain instance of the feedback law (no learning)."""

    kind = "fixed_gain"

    def __init__(self, gains: GainAction):
        self.gains = gains

    def __call__(self, state, h_prev, eq, params):
        return gain_feedback(h_prev, state, eq, self.gains, params)


class PpoPolicyController:
    """Feedback law with gains produced by a trained policy network.

    In deterministic mode the action is the head mean; otherwise each gain
    is sampled from its Normal(mu_i, sigma_i).
    """

    kind = "ppo_policy"

    def __init__(self, actor, deterministic: bool = True,
                 rng: np.random.Generator | None = None):
        self.actor = actor
        self.deterministic = deterministic
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.last_action: GainAction | None = None

    def act(self, state_vector: np.ndarray) -> GainAction:
        mu, sigma = self.actor.policy(state_vector)
        if self.deterministic:
            a = mu
        else:
            a = self.rng.normal(mu, sigma)
        return GainAction(*map(float, a))

    def __call__(self, state, h_prev, eq, params):
        from .ppo import encode_state

        vec = encode_state(state, h_prev, eq, params)
        self.last_action = self.act(vec)
        return gain_feedback(h_prev, state, eq, self.last_action, params)

"""PPO training loop over the traffic simulator.

One update per collected batch: discounted returns and advantages are
computed once from the frozen rollout, then the clipped surrogate and the
critic regression are optimized for a fixed number of epochs with Adam,
after which the rollout policy is refreshed (theta_old <- theta).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import sim
from .control import GainAction, gain_feedback
from .model import EquilibriumPoint, TrafficParams, equilibrium
from .nn import ActorNet, CriticNet, adam_step

__all__ = [
    "PpoHyper",
    "Trajectory",
    "TrafficEnv",
    "UpdateStats",
    "TrainResult",
    "encode_state",
    "reward",
    "discounted_returns",
    "advantage",
    "gaussian_log_prob",
    "clipped_objective",
    "critic_loss",
    "collect_batch",
    "update",
    "train",
]

CURVE_SCHEMA = "accwave-learning-curve-v1"

LOG2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PpoHyper:
    gamma: float = 0.99
    clip_eps: float = 0.2
    epochs_per_batch: int = 150
    batch_len: int = 100
    lr: float = 0.001
    stop_reward: float = -0.1
    max_updates: int = 3000
    advantage_norm: bool = True
    adv_std_floor: float = 1e-8
    episode_s: float = 300.0
    reset_each_episode: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError("clip_eps must lie in (0, 1)")
        if self.batch_len <= 0 or self.epochs_per_batch <= 0:
            raise ValueError("batch_len and epochs_per_batch must be positive")


def encode_state(state, prev_input: np.ndarray, eq: EquilibriumPoint,
                 params: TrafficParams) -> np.ndarray:
    """[rho/rho_bar, v/v_bar, h_prev/h_bar] — all-ones at equilibrium."""
    if not (state.rho.shape == state.v.shape == prev_input.shape):
        raise ValueError("state and input profiles disagree in size")
    return np.concatenate([
        state.rho / eq.rho_bar,
        state.v / eq.v_bar,
        prev_input / params.h_acc_bar,
    ])


def reward(state, eq: EquilibriumPoint) -> float:
    """Negative sum over nodes of squared relative deviations; 0 at
    equilibrium and strictly negative elsewhere."""
    dr = (state.rho - eq.rho_bar) / eq.rho_bar
    dv = (state.v - eq.v_bar) / eq.v_bar
    return float(-(np.sum(dr * dr) + np.sum(dv * dv)))


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """R_t = sum_i gamma^i r_{t+i}, computed backward over the batch."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValueError("empty reward list")
    out = np.empty_like(rewards)
    acc = 0.0
    for i in range(rewards.size - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def advantage(returns, values, normalize: bool = True,
              std_floor: float = 1e-8) -> np.ndarray:
    """A_t = R_t - V_t, optionally batch-normalized to zero mean/unit std."""
    returns = np.asarray(returns, dtype=float)
    values = np.asarray(values, dtype=float)
    if returns.shape != values.shape:
        raise ValueError("returns and values disagree in length")
    adv = returns - values
    if normalize:
        adv = (adv - adv.mean()) / max(float(adv.std()), std_floor)
    return adv


def gaussian_log_prob(action, mu, sigma):
    """Sum of the three independent Normal log-densities (last axis)."""
    action = np.asarray(action, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    z = (action - mu) / sigma
    return np.sum(-0.5 * z * z - np.log(sigma) - 0.5 * LOG2PI, axis=-1)


def clipped_objective(ratio, advantage_val, clip_eps: float):
    """min(ratio*A, clip(ratio, 1-eps, 1+eps)*A)."""
    ratio = np.asarray(ratio, dtype=float)
    a = np.asarray(advantage_val, dtype=float)
    out = np.minimum(ratio * a, np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * a)
    return out if out.ndim else float(out)


def critic_loss(returns, values) -> float:
    """Mean squared regression error of the value head."""
    returns = np.asarray(returns, dtype=float)
    values = np.asarray(values, dtype=float)
    if returns.shape != values.shape:
        raise ValueError("returns and values disagree in length")
    return float(np.mean((returns - values) ** 2))


class TrafficEnv:
    """Simulator wrapper holding the loop state of Algorithm-style rollouts:
    plant state, previous commanded profile and the delay buffer."""

    def __init__(self, params: TrafficParams, grid: sim.Grid,
                 eq: EquilibriumPoint | None = None, alpha_sampler=None):
        self.params = params
        self.grid = grid
        self.eq = eq if eq is not None else equilibrium(params)
        self.alpha_sampler = alpha_sampler
        self.h_bar = np.full(grid.M + 1, params.h_acc_bar)
        self.diverged = False
        self.reset()

    @property
    def state_dim(self) -> int:
        return 3 * (self.grid.M + 1)

    def reset(self) -> np.ndarray:
        self.state = sim.initial_state(self.params, self.eq, self.grid)
        self.h_prev = self.h_bar.copy()
        self.buffer = sim.DelayBuffer(self.grid.delay_steps, fill=self.h_bar)
        self.diverged = False
        return self.state_vector()

    def state_vector(self) -> np.ndarray:
        return encode_state(self.state, self.h_prev, self.eq, self.params)

    def apply(self, gains: GainAction) -> float:
        """Route one action through the feedback law, the delay buffer and
        the plant; returns the post-step reward."""
        h_cmd = gain_feedback(self.h_prev, self.state, self.eq, gains, self.params)
        h_app = self.buffer.push_pop(h_cmd)
        p = self.params
        if self.alpha_sampler is not None:
            p = p.with_alpha(self.alpha_sampler())
        try:
            self.state = sim.step(self.state, h_app, p, self.grid)
        except (sim.PositivityError, sim.CflError):
            self.diverged = True
            return reward(self.state, self.eq)
        self.h_prev = h_cmd
        return reward(self.state, self.eq)


@dataclass
class Trajectory:
    states: np.ndarray      # (B, state_dim)
    actions: np.ndarray     # (B, 3)
    log_prob_old: np.ndarray  # (B,)
    rewards: np.ndarray     # (B,)
    terminal_state: np.ndarray  # (state_dim,)
    diverged: bool = False


def collect_batch(env: TrafficEnv, actor_old: ActorNet, hyper: PpoHyper,
                  rng: np.random.Generator, deterministic: bool = False) -> Trajectory:
    """Roll the frozen policy for batch_len steps. On divergence the batch
    is padded with the frozen state and the worst observed reward."""
    B = hyper.batch_len
    dim = env.state_dim
    S = np.empty((B, dim))
    A = np.empty((B, 3))
    logp = np.empty(B)
    R = np.empty(B)
    for k in range(B):
        s = env.state_vector()
        mu, sigma = actor_old.policy(s)
        a = mu if deterministic else rng.normal(mu, sigma)
        S[k] = s
        A[k] = a
        logp[k] = gaussian_log_prob(a, mu, sigma)
        R[k] = env.apply(GainAction(*map(float, a)))
        if env.diverged:
            worst = float(R[: k + 1].min())
            for j in range(k + 1, B):
                a_j = mu if deterministic else rng.normal(mu, sigma)
                S[j] = s
                A[j] = a_j
                logp[j] = gaussian_log_prob(a_j, mu, sigma)
                R[j] = worst
            return Trajectory(S, A, logp, R, terminal_state=s, diverged=True)
    return Trajectory(S, A, logp, R, terminal_state=env.state_vector())


@dataclass
class UpdateStats:
    actor_loss: float
    critic_loss: float
    mean_ratio: float
    clip_fraction: float
    mean_reward: float
    epoch_critic_losses: list = field(default_factory=list)


def update(actor: ActorNet, critic: CriticNet, batch: Trajectory,
           hyper: PpoHyper, record_epochs: bool = False) -> UpdateStats:
    """Optimize the clipped surrogate (ascent via Adam on its negation) and
    the critic regression for epochs_per_batch passes over the batch."""
    S, A = batch.states, batch.actions
    B = S.shape[0]
    returns = discounted_returns(batch.rewards, hyper.gamma)
    values = critic.value(S)
    adv = advantage(returns, values, hyper.advantage_norm, hyper.adv_std_floor)
    eps = hyper.clip_eps

    ratio = np.ones(B)
    a_loss = c_loss = 0.0
    epoch_losses = []
    for _ in range(hyper.epochs_per_batch):
        mu, sigma, cache = actor.policy_cached(S)
        logp = gaussian_log_prob(A, mu, sigma)
        ratio = np.exp(logp - batch.log_prob_old)
        unclipped = ratio * adv
        clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
        obj = np.minimum(unclipped, clipped)
        a_loss = -float(obj.mean())
        if not np.isfinite(a_loss):
            raise FloatingPointError(
                f"non-finite actor loss (ratio range [{ratio.min():.3g}, "
                f"{ratio.max():.3g}], adv range [{adv.min():.3g}, {adv.max():.3g}])")
        # d(-J)/d(mu, sigma) through the taken branch of the min
        d_ratio = np.where(unclipped <= clipped, adv, 0.0) / B
        d_logp = d_ratio * ratio
        z = (A - mu) / sigma
        d_mu = -(d_logp[:, None] * z / sigma)
        d_sigma = -(d_logp[:, None] * (z * z - 1.0) / sigma)
        grad = actor.backward(cache, d_mu, d_sigma)
        adam_step(actor.mlp, grad, hyper.lr)

        v_pred, v_cache = critic.value_cached(S)
        c_loss = critic_loss(returns, v_pred)
        if not np.isfinite(c_loss):
            raise FloatingPointError("non-finite critic loss")
        d_v = -2.0 * (returns - v_pred) / B
        adam_step(critic.mlp, critic.backward(v_cache, d_v), hyper.lr)
        if record_epochs:
            epoch_losses.append(c_loss)

    clip_fraction = float(np.mean((ratio < 1.0 - eps) | (ratio > 1.0 + eps)))
    return UpdateStats(
        actor_loss=a_loss,
        critic_loss=c_loss,
        mean_ratio=float(ratio.mean()),
        clip_fraction=clip_fraction,
        mean_reward=float(batch.rewards.mean()),
        epoch_critic_losses=epoch_losses,
    )


@dataclass
class TrainResult:
    converged: bool
    updates: int
    episodes: int
    episode_means: list
    final_episode_mean: float
    best_episode_mean: float
    wall_time_s: float
    curve_rows: list = field(default_factory=list)


def train(env: TrafficEnv, actor: ActorNet, critic: CriticNet, hyper: PpoHyper,
          seed: int = 0, curve_path=None, progress=None) -> TrainResult:
    """Run PPO until the stop rule or the update budget.

    The run is continuous by default: the plant is reset only at the start
    (and after divergence); "episodes" are consecutive windows of
    episode_s seconds whose per-step reward mean drives the stop rule. With
    ``hyper.reset_each_episode`` the plant re-seeds the stop-and-go initial
    condition at each window boundary.
    """
    rng = np.random.default_rng(seed)
    actor_old = ActorNet(actor.spec, mu_init=None, sigma_init=None)
    actor_old.mlp.copy_params_from(actor.mlp)

    steps_per_episode = int(round(hyper.episode_s / env.grid.dt))
    env.reset()

    curve = []
    episode_means: list[float] = []
    ep_rewards: list[float] = []
    episode = 0
    sim_time = 0.0
    converged = False
    best_mean = -np.inf
    best_theta = actor.mlp.theta.copy()
    t0 = time.perf_counter()

    n_updates = 0
    for update_idx in range(1, hyper.max_updates + 1):
        batch = collect_batch(env, actor_old, hyper, rng)
        stats = update(actor, critic, batch, hyper)
        actor_old.mlp.copy_params_from(actor.mlp)
        n_updates = update_idx
        sim_time += hyper.batch_len * env.grid.dt
        ep_rewards.extend(batch.rewards.tolist())
        curve.append((update_idx, episode, sim_time, stats.mean_reward,
                      stats.actor_loss, stats.critic_loss, stats.clip_fraction))
        if progress is not None:
            progress(update_idx, episode, stats)

        episode_done = batch.diverged or len(ep_rewards) >= steps_per_episode
        if episode_done:
            ep_mean = float(np.mean(ep_rewards))
            episode_means.append(ep_mean)
            episode += 1
            ep_rewards = []
            if ep_mean > best_mean:
                best_mean = ep_mean
                best_theta = actor.mlp.theta.copy()
            if batch.diverged or hyper.reset_each_episode:
                env.reset()
            if not batch.diverged and ep_mean >= hyper.stop_reward:
                converged = True
                break

    if not converged and best_mean > -np.inf:
        # budget exhausted: hand back the best-scoring policy snapshot
        actor.mlp.theta[:] = best_theta

    result = TrainResult(
        converged=converged,
        updates=n_updates,
        episodes=episode,
        episode_means=episode_means,
        final_episode_mean=episode_means[-1] if episode_means else -np.inf,
        best_episode_mean=best_mean,
        wall_time_s=time.perf_counter() - t0,
        curve_rows=curve,
    )
    if curve_path is not None:
        write_curve_csv(curve, curve_path)
    return result


def write_curve_csv(rows, path):
    with open(path, "w") as f:
        f.write(f"# schema={CURVE_SCHEMA}\n")
        f.write("update_index,episode,sim_time_s,mean_reward,actor_loss,"
                "critic_loss,clip_fraction\n")
        for r in rows:
            f.write(f"{r[0]},{r[1]},{r[2]:.6g},{r[3]:.10g},{r[4]:.10g},"
                    f"{r[5]:.10g},{r[6]:.6g}\n")

"""Small feedforward networks with analytic gradients and Adam updates.

Plain numpy: parameters live in one flat float64 vector with per-layer
views, so the optimizer and checkpoints treat a network as a single array.
Hidden layers are rectified; heads are sigmoid (actor: three means and
three standard deviations, the latter floored at SIGMA_FLOOR) or scaled
tanh (critic).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

__all__ = [
    "SIGMA_FLOOR",
    "NetworkSpec",
    "Mlp",
    "ActorNet",
    "CriticNet",
    "actor_spec",
    "critic_spec",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]

SIGMA_FLOOR = 1e-6
CHECKPOINT_FORMAT = "accwave-ckpt-v1"

_ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description: widths, per-layer activations, head scale."""

    layer_sizes: tuple
    activations: tuple
    head_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise ValueError("need one activation per affine layer")
        for a in self.activations:
            if a not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if any(int(s) <= 0 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")

    @property
    def input_dim(self) -> int:
        return int(self.layer_sizes[0])

    @property
    def output_dim(self) -> int:
        return int(self.layer_sizes[-1])

    def to_json(self) -> str:
        return json.dumps({
            "layer_sizes": [int(s) for s in self.layer_sizes],
            "activations": list(self.activations),
            "head_scale": self.head_scale,
            "seed": self.seed,
        })

    @classmethod
    def from_json(cls, s: str) -> "NetworkSpec":
        d = json.loads(s)
        return cls(tuple(d["layer_sizes"]), tuple(d["activations"]),
                   d["head_scale"], d["seed"])


def actor_spec(input_dim: int, seed: int = 0,
               hidden=(1024, 512, 512, 512, 512, 512)) -> NetworkSpec:
    """Policy network: 6 sigmoid outputs (3 means, 3 standard deviations)."""
    sizes = (input_dim, *hidden, 6)
    acts = ("relu",) * len(hidden) + ("sigmoid",)
    return NetworkSpec(sizes, acts, head_scale=1.0, seed=seed)


def critic_spec(input_dim: int, seed: int = 0, value_bound: float = 50.0,
                hidden=(1024, 512, 512, 512, 512, 512)) -> NetworkSpec:
    """Value network: one tanh output scaled by ``value_bound``."""
    sizes = (input_dim, *hidden, 1)
    acts = ("relu",) * len(hidden) + ("tanh",)
    return NetworkSpec(sizes, acts, head_scale=value_bound, seed=seed)


def _apply_act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        # stable in both tails
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name: str, a: np.ndarray, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


class Mlp:
    """Feedforward stack over a flat parameter vector with Adam moments."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        sizes = spec.layer_sizes
        n_params = sum(sizes[i] * sizes[i + 1] + sizes[i + 1]
                       for i in range(len(sizes) - 1))
        self.theta = np.zeros(n_params)
        self.adam_m = np.zeros(n_params)
        self.adam_v = np.zeros(n_params)
        self.adam_t = 0
        self._adam_scratch = np.empty(n_params)
        self._views = []
        off = 0
        for i in range(len(sizes) - 1):
            n_in, n_out = int(sizes[i]), int(sizes[i + 1])
            W = self.theta[off:off + n_in * n_out].reshape(n_in, n_out)
            off += n_in * n_out
            b = self.theta[off:off + n_out]
            off += n_out
            self._views.append((W, b))
        self._init_params()

    @property
    def n_params(self) -> int:
        return self.theta.size

    def _init_params(self):
        """Uniform fan-in scaling, deterministic in the spec seed."""
        rng = np.random.default_rng(self.spec.seed)
        for W, b in self._views:
            bound = 1.0 / np.sqrt(W.shape[0])
            W[:] = rng.uniform(-bound, bound, size=W.shape)
            b[:] = rng.uniform(-bound, bound, size=b.shape)

    def zero_head(self, bias=None):
        """Zero the final layer's weights and optionally preset its biases."""
        W, b = self._views[-1]
        W[:] = 0.0
        b[:] = 0.0 if bias is None else np.asarray(bias, dtype=float)

    def forward(self, x: np.ndarray, want_cache: bool = False):
        """Evaluate the network; x is (B, in) or (in,)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        A = x[None, :] if single else x
        if A.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"input has {A.shape[1]} features, spec wants {self.spec.input_dim}")
        cache = [(A, None)] if want_cache else None
        for (W, b), act in zip(self._views, self.spec.activations):
            Z = A @ W + b
            A = _apply_act(act, Z)
            if want_cache:
                cache.append((A, Z))
        Y = A * self.spec.head_scale
        Y = Y[0] if single else Y
        return (Y, cache) if want_cache else Y

    def backward(self, cache, dY: np.ndarray) -> np.ndarray:
        """Gradient of sum_b <dY_b, Y_b> w.r.t. the flat parameter vector."""
        dY = np.asarray(dY, dtype=float)
        if dY.ndim == 1:
            dY = dY[None, :]
        if dY.shape != cache[-1][0].shape:
            raise ValueError("output gradient shape does not match forward batch")
        grad = np.empty_like(self.theta)
        g_views = []
        off = 0
        for W, b in self._views:
            gW = grad[off:off + W.size].reshape(W.shape)
            off += W.size
            gb = grad[off:off + b.size]
            off += b.size
            g_views.append((gW, gb))
        dA = dY * self.spec.head_scale
        for i in range(len(self._views) - 1, -1, -1):
            A_i, Z_i = cache[i + 1]
            A_prev = cache[i][0]
            dZ = dA * _act_grad(self.spec.activations[i], A_i, Z_i)
            gW, gb = g_views[i]
            gW[:] = A_prev.T @ dZ
            gb[:] = dZ.sum(axis=0)
            if i > 0:
                dA = dZ @ self._views[i][0].T
        return grad

    def clone(self) -> "Mlp":
        other = Mlp(self.spec)
        other.theta[:] = self.theta
        other.adam_m[:] = self.adam_m
        other.adam_v[:] = self.adam_v
        other.adam_t = self.adam_t
        return other

    def copy_params_from(self, other: "Mlp"):
        if other.spec != self.spec:
            raise ValueError("parameter copy across different specs")
        self.theta[:] = other.theta


def adam_step(net: Mlp, grad: np.ndarray, lr: float = 0.001,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Standard bias-corrected Adam update, in place.

    Delegates to the fused kernel: this runs a few hundred thousand times
    per training job on multi-million-parameter vectors.
    """
    if grad.shape != net.theta.shape:
        raise ValueError("gradient shape does not match parameters")
    net.adam_t += 1
    _kernels.adam_fused(net.theta, net.adam_m, net.adam_v,
                        np.ascontiguousarray(grad, dtype=float), lr, beta1,
                        beta2, eps, 1.0 - beta1 ** net.adam_t,
                        1.0 - beta2 ** net.adam_t)


class ActorNet:
    """Policy head: splits the 6 sigmoid outputs into (mu, sigma)."""

    def __init__(self, spec: NetworkSpec, mu_init: float | None = 0.5,
                 sigma_init: float | None = 0.15):
        if spec.output_dim != 6:
            raise ValueError("actor head must have 6 outputs")
        self.mlp = Mlp(spec)
        if mu_init is not None and sigma_init is not None:
            logit = lambda p: float(np.log(p / (1.0 - p)))
            self.mlp.zero_head([logit(mu_init)] * 3 + [logit(sigma_init)] * 3)

    @property
    def spec(self):
        return self.mlp.spec

    def policy(self, x: np.ndarray):
        """(mu, sigma) with sigma = sigmoid + SIGMA_FLOOR, elementwise > 0."""
        y = self.mlp.forward(x)
        if y.ndim == 1:
            return y[:3], y[3:] + SIGMA_FLOOR
        return y[:, :3], y[:, 3:] + SIGMA_FLOOR

    def policy_cached(self, x: np.ndarray):
        y, cache = self.mlp.forward(x, want_cache=True)
        return y[:, :3], y[:, 3:] + SIGMA_FLOOR, cache

    def backward(self, cache, d_mu: np.ndarray, d_sigma: np.ndarray) -> np.ndarray:
        return self.mlp.backward(cache, np.concatenate([d_mu, d_sigma], axis=1))


class CriticNet:
    """Value head: single scaled-tanh output."""

    def __init__(self, spec: NetworkSpec):
        if spec.output_dim != 1:
            raise ValueError("critic head must have 1 output")
        self.mlp = Mlp(spec)
        self.mlp.zero_head()

    @property
    def spec(self):
        return self.mlp.spec

    def value(self, x: np.ndarray):
        y = self.mlp.forward(x)
        return float(y[0]) if y.ndim == 1 else y[:, 0]

    def value_cached(self, x: np.ndarray):
        y, cache = self.mlp.forward(x, want_cache=True)
        return y[:, 0], cache

    def backward(self, cache, d_value: np.ndarray) -> np.ndarray:
        return self.mlp.backward(cache, np.asarray(d_value)[:, None])


def _pack_net(prefix: str, net: Mlp, out: dict):
    out[f"{prefix}_spec"] = net.spec.to_json()
    out[f"{prefix}_theta"] = net.theta
    out[f"{prefix}_adam_m"] = net.adam_m
    out[f"{prefix}_adam_v"] = net.adam_v
    out[f"{prefix}_adam_t"] = np.array(net.adam_t)


def _unpack_net(prefix: str, data) -> Mlp:
    spec = NetworkSpec.from_json(str(data[f"{prefix}_spec"]))
    net = Mlp(spec)
    net.theta[:] = data[f"{prefix}_theta"]
    net.adam_m[:] = data[f"{prefix}_adam_m"]
    net.adam_v[:] = data[f"{prefix}_adam_v"]
    net.adam_t = int(data[f"{prefix}_adam_t"])
    return net


def save_checkpoint(path, actor: ActorNet, critic: CriticNet, meta: dict | None = None):
    """Versioned npz with both networks, their Adam state and run metadata."""
    payload = {"format": CHECKPOINT_FORMAT,
               "meta": json.dumps(meta or {}, sort_keys=True)}
    _pack_net("actor", actor.mlp, payload)
    _pack_net("critic", critic.mlp, payload)
    np.savez(path, **payload)


def load_checkpoint(path, expect_input_dim: int | None = None):
    """Load (actor, critic, meta); rejects unknown formats and input-dim
    mismatches against the caller's grid."""
    with np.load(path, allow_pickle=False) as data:
        fmt = str(data["format"])
        if fmt != CHECKPOINT_FORMAT:
            raise CheckpointError(f"unsupported checkpoint format {fmt!r}")
        actor_mlp = _unpack_net("actor", data)
        critic_mlp = _unpack_net("critic", data)
        meta = json.loads(str(data["meta"]))
    if expect_input_dim is not None:
        for name, net in (("actor", actor_mlp), ("critic", critic_mlp)):
            if net.spec.input_dim != expect_input_dim:
                raise CheckpointError(
                    f"{name} expects {net.spec.input_dim} inputs but the "
                    f"current grid encodes {expect_input_dim}")
    actor = ActorNet(actor_mlp.spec, mu_init=None, sigma_init=None)
    actor.mlp = actor_mlp
    critic = CriticNet(critic_mlp.spec)
    critic.mlp = critic_mlp
    return actor, critic, meta

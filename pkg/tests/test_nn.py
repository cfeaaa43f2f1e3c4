import numpy as np
import pytest

from accwave.nn import (SIGMA_FLOOR, ActorNet, CheckpointError, CriticNet,
                        Mlp, NetworkSpec, actor_spec, adam_step, critic_spec,
                        load_checkpoint, save_checkpoint)


def small_actor(seed=0):
    return ActorNet(actor_spec(12, seed=seed, hidden=(16, 8)))


def small_critic(seed=0, bound=50.0):
    return CriticNet(critic_spec(12, seed=seed, value_bound=bound, hidden=(16, 8)))


class TestSpec:
    def test_reference_architectures(self):
        a = actor_spec(603, seed=1)
        assert a.layer_sizes == (603, 1024, 512, 512, 512, 512, 512, 6)
        assert a.activations[-1] == "sigmoid"
        assert len(a.layer_sizes) == 8
        c = critic_spec(603, seed=2, value_bound=50.0)
        assert c.layer_sizes == (603, 1024, 512, 512, 512, 512, 512, 1)
        assert c.activations[-1] == "tanh"
        assert c.head_scale == 50.0

    def test_activation_count_mismatch(self):
        with pytest.raises(ValueError):
            NetworkSpec((3, 4), ("relu", "relu"))

    def test_json_roundtrip(self):
        spec = actor_spec(10, seed=3, hidden=(5,))
        assert NetworkSpec.from_json(spec.to_json()) == spec


class TestForward:
    def test_zero_params_sigmoid_head(self):
        net = Mlp(NetworkSpec((4, 3, 6), ("relu", "sigmoid"), seed=0))
        net.theta[:] = 0.0
        out = net.forward(np.ones(4))
        assert np.allclose(out, 0.5, rtol=0, atol=0)

    def test_identity_single_layer(self):
        net = Mlp(NetworkSpec((3, 3), ("identity",), seed=0))
        net.theta[:] = 0.0
        W, b = net._views[0]
        W[:] = np.eye(3)
        x = np.array([0.3, -1.2, 2.5])
        assert np.array_equal(net.forward(x), x)

    def test_sigma_floor_dominates(self):
        actor = small_actor()
        W, b = actor.mlp._views[-1]
        W[:] = 0.0
        b[:] = [0.0, 0.0, 0.0, -1000.0, -1000.0, -1000.0]
        _, sigma = actor.policy(np.ones(12))
        assert np.all(sigma >= SIGMA_FLOOR)
        assert np.all(sigma <= SIGMA_FLOOR * 1.0001)

    def test_shape_mismatch(self):
        net = small_actor().mlp
        with pytest.raises(ValueError, match="features"):
            net.forward(np.ones(5))

    def test_batch_consistency(self):
        net = small_actor().mlp
        X = np.random.default_rng(0).normal(size=(4, 12))
        batch = net.forward(X)
        rows = np.stack([net.forward(x) for x in X])
        assert np.allclose(batch, rows, rtol=0, atol=0)


def fd_gradient(net: Mlp, x, weights, probes, step=1e-5, rng=None):
    """Central finite differences of f(theta) = <weights, net(x)>."""
    rng = rng or np.random.default_rng(0)
    idx = rng.choice(net.n_params, size=min(probes, net.n_params), replace=False)
    grads = np.empty(len(idx))
    for j, i in enumerate(idx):
        orig = net.theta[i]
        net.theta[i] = orig + step
        up = float(np.sum(weights * net.forward(x)))
        net.theta[i] = orig - step
        dn = float(np.sum(weights * net.forward(x)))
        net.theta[i] = orig
        grads[j] = (up - dn) / (2 * step)
    return idx, grads


class TestBackward:
    def test_linear_1to1(self):
        net = Mlp(NetworkSpec((1, 1), ("identity",), seed=0))
        net.theta[:] = [2.0, 0.5]  # w, b
        x = np.array([3.0])
        _, cache = net.forward(x, want_cache=True)
        grad = net.backward(cache, np.array([1.0]))
        assert grad[0] == pytest.approx(3.0)  # d y / d w = x
        assert grad[1] == pytest.approx(1.0)  # d y / d b = 1

    def test_zero_output_grad(self):
        net = small_actor().mlp
        x = np.random.default_rng(1).normal(size=12)
        _, cache = net.forward(x, want_cache=True)
        grad = net.backward(cache, np.zeros(6))
        assert np.all(grad == 0.0)

    @pytest.mark.parametrize("make", [small_actor, small_critic])
    def test_fd_agreement_small(self, make):
        net = make().mlp
        # randomize all parameters so the head is not at its zero init
        net.theta[:] = np.random.default_rng(7).normal(scale=0.3, size=net.n_params)
        x = np.random.default_rng(8).normal(size=12)
        w = np.random.default_rng(9).normal(size=net.spec.output_dim)
        _, cache = net.forward(x, want_cache=True)
        analytic = net.backward(cache, w)
        idx, fd = fd_gradient(net, x, w, probes=60,
                              rng=np.random.default_rng(10))
        denom = np.maximum(np.abs(fd), 1e-8)
        assert np.max(np.abs(analytic[idx] - fd) / denom) < 1e-4

    def test_batch_grad_is_sum(self):
        net = small_critic().mlp
        net.theta[:] = np.random.default_rng(3).normal(scale=0.2, size=net.n_params)
        X = np.random.default_rng(4).normal(size=(5, 12))
        dY = np.random.default_rng(5).normal(size=(5, 1))
        _, cache = net.forward(X, want_cache=True)
        full = net.backward(cache, dY)
        acc = np.zeros_like(full)
        for i in range(5):
            _, c = net.forward(X[i], want_cache=True)
            acc += net.backward(c, dY[i])
        assert np.allclose(full, acc, rtol=1e-12, atol=1e-14)


class TestAdam:
    def test_first_step_magnitude(self):
        net = Mlp(NetworkSpec((1, 1), ("identity",), seed=0))
        net.theta[:] = [1.0, 1.0]
        adam_step(net, np.array([1.0, 0.0]), lr=0.001)
        # bias-corrected first step: lr * g / (|g| + eps)
        assert net.theta[0] == pytest.approx(1.0 - 0.001, rel=1e-6)
        assert net.theta[1] == pytest.approx(1.0)

    def test_zero_gradient_noop(self):
        net = small_actor().mlp
        before = net.theta.copy()
        adam_step(net, np.zeros(net.n_params))
        assert np.array_equal(net.theta, before)
        assert net.adam_t == 1

    def test_determinism(self):
        a = small_actor(seed=5).mlp
        b = small_actor(seed=5).mlp
        g = np.random.default_rng(2).normal(size=a.n_params)
        adam_step(a, g)
        adam_step(b, g)
        assert np.array_equal(a.theta, b.theta)

    def test_shape_check(self):
        net = small_actor().mlp
        with pytest.raises(ValueError):
            adam_step(net, np.zeros(3))


class TestInitialization:
    def test_seed_determinism(self):
        a = Mlp(actor_spec(12, seed=11, hidden=(16, 8)))
        b = Mlp(actor_spec(12, seed=11, hidden=(16, 8)))
        assert np.array_equal(a.theta, b.theta)

    def test_different_seeds_differ(self):
        a = Mlp(actor_spec(12, seed=11, hidden=(16, 8)))
        b = Mlp(actor_spec(12, seed=12, hidden=(16, 8)))
        assert not np.array_equal(a.theta, b.theta)

    def test_actor_head_presets(self):
        actor = ActorNet(actor_spec(12, seed=0, hidden=(16, 8)),
                         mu_init=0.5, sigma_init=0.15)
        mu, sigma = actor.policy(np.random.default_rng(0).normal(size=12))
        assert np.allclose(mu, 0.5, atol=1e-12)
        assert np.allclose(sigma, 0.15 + SIGMA_FLOOR, atol=1e-9)


class TestActorCritic:
    def test_sigma_positive_for_any_params(self):
        actor = small_actor()
        rng = np.random.default_rng(0)
        for _ in range(10):
            actor.mlp.theta[:] = rng.normal(scale=5.0, size=actor.mlp.n_params)
            _, sigma = actor.policy(rng.normal(size=12))
            assert np.all(sigma >= SIGMA_FLOOR)

    def test_critic_bound(self):
        critic = small_critic(bound=50.0)
        rng = np.random.default_rng(1)
        for _ in range(10):
            critic.mlp.theta[:] = rng.normal(scale=5.0, size=critic.mlp.n_params)
            assert abs(critic.value(rng.normal(size=12))) <= 50.0

    def test_wrong_head_width_rejected(self):
        with pytest.raises(ValueError):
            ActorNet(critic_spec(12, hidden=(8,)))
        with pytest.raises(ValueError):
            CriticNet(actor_spec(12, hidden=(8,)))


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        actor = small_actor(seed=3)
        critic = small_critic(seed=4)
        actor.mlp.adam_t = 17
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, actor, critic, meta={"trained_delay_s": 4.0})
        a2, c2, meta = load_checkpoint(path)
        assert np.array_equal(a2.mlp.theta, actor.mlp.theta)
        assert np.array_equal(c2.mlp.theta, critic.mlp.theta)
        assert a2.mlp.adam_t == 17
        assert meta["trained_delay_s"] == 4.0

    def test_rejects_input_dim_mismatch(self, tmp_path):
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, small_actor(), small_critic(), meta={})
        with pytest.raises(CheckpointError, match="inputs"):
            load_checkpoint(path, expect_input_dim=603)

    def test_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bad.npz"
        np.savez(path, format="something-else")
        with pytest.raises(CheckpointError, match="format"):
            load_checkpoint(path)

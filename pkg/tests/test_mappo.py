import numpy as np
import pytest

from quantumfrog import nn
from quantumfrog.env import EnvConfig, OBS_FLAT
from quantumfrog.mappo import (
    actor_logits,
    frog_view,
    MappoModel,
    PpoHyper,
    RolloutBuffer,
    clipped_surrogate,
    collect_rollout,
    compute_gae,
    entropy,
    greedy_joint_actions,
    log_softmax,
    ppo_loss,
    ppo_update,
    sample_categorical,
    train_mappo,
)
from quantumfrog.vecenv import VecEnv


def gae_double_sum(rewards, values, dones, bootstrap, gamma, lam):
    """Direct-sum oracle: A_t = sum_k (gamma*lam)^k delta_{t+k}, cut at the
    first done at or after t."""
    T, N = rewards.shape
    next_values = np.vstack([values[1:], bootstrap[None, :]])
    deltas = rewards + gamma * next_values * (1.0 - dones) - values
    adv = np.zeros((T, N))
    for lane in range(N):
        for t in range(T):
            total = 0.0
            factor = 1.0
            for k in range(t, T):
                total += factor * deltas[k, lane]
                if dones[k, lane]:
                    break
                factor *= gamma * lam
            adv[t, lane] = total
    return adv


def tiny_hyper(**kw):
    defaults = dict(rollout_len=16, lanes=4, minibatch=32, epochs=2,
                    total_steps=128)
    defaults.update(kw)
    return PpoHyper(**defaults)


class TestGae:
    def test_lambda_zero_gives_td_residuals(self):
        rng = np.random.default_rng(0)
        rewards = rng.standard_normal((8, 3))
        values = rng.standard_normal((8, 3))
        dones = np.zeros((8, 3), dtype=bool)
        bootstrap = rng.standard_normal(3)
        adv, _ = compute_gae(rewards, values, dones, bootstrap, gamma=0.99, lam=0.0)
        next_values = np.vstack([values[1:], bootstrap[None, :]])
        deltas = rewards + 0.99 * next_values - values
        assert np.allclose(adv, deltas, atol=1e-12)

    def test_hand_recursion_two_steps(self):
        rewards = np.array([[1.0], [-1.0]])
        values = np.array([[0.5], [0.2]])
        dones = np.zeros((2, 1), dtype=bool)
        adv, returns = compute_gae(rewards, values, dones, np.array([0.0]),
                                   gamma=0.99, lam=0.95)
        # delta1 = -1 - 0.2 = -1.2; delta0 = 1 + 0.99*0.2 - 0.5 = 0.698
        # A1 = -1.2; A0 = 0.698 + 0.99*0.95*(-1.2) = -0.4306
        assert adv[1, 0] == pytest.approx(-1.2, abs=1e-12)
        assert adv[0, 0] == pytest.approx(0.698 + 0.99 * 0.95 * -1.2, abs=1e-12)
        assert np.allclose(returns, adv + values)

    def test_done_masks_recursion(self):
        rewards = np.array([[1.0], [5.0]])
        values = np.array([[0.0], [0.0]])
        dones = np.array([[True], [False]])
        adv, _ = compute_gae(rewards, values, dones, np.array([0.0]),
                             gamma=0.99, lam=0.95)
        assert adv[0, 0] == pytest.approx(1.0)  # no contribution from t=1

    def test_matches_double_sum_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            T = int(rng.integers(2, 17))
            N = int(rng.integers(1, 4))
            rewards = rng.standard_normal((T, N))
            values = rng.standard_normal((T, N))
            dones = rng.random((T, N)) < 0.2
            bootstrap = rng.standard_normal(N)
            adv, returns = compute_gae(rewards, values, dones, bootstrap,
                                       gamma=0.99, lam=0.95)
            oracle = gae_double_sum(rewards, values, dones.astype(float),
                                    bootstrap, 0.99, 0.95)
            assert np.max(np.abs(adv - oracle)) <= 1e-10
            assert np.allclose(returns - adv, values, atol=0)


class TestClippedSurrogate:
    def test_ratio_one_identity(self):
        adv = np.array([2.5, -1.25])
        assert np.array_equal(clipped_surrogate(np.ones(2), adv, 0.2), adv)

    def test_positive_advantage_clips_high_ratio(self):
        val = clipped_surrogate(np.array([1.5]), np.array([1.0]), 0.2)
        assert val[0] == pytest.approx(1.2)

    def test_negative_advantage_clips_low_ratio(self):
        val = clipped_surrogate(np.array([0.5]), np.array([-1.0]), 0.2)
        assert val[0] == pytest.approx(-0.8)


class TestDistributions:
    def test_uniform_entropy_is_ln5(self):
        logits = np.zeros((3, 5))
        assert np.allclose(entropy(logits), np.log(5.0))

    def test_entropy_bounds(self):
        rng = np.random.default_rng(2)
        h = entropy(rng.standard_normal((100, 5)) * 3)
        assert np.all(h >= 0) and np.all(h <= np.log(5.0) + 1e-12)

    def test_sampling_matches_probabilities(self):
        logits = np.log(np.array([[0.5, 0.2, 0.1, 0.1, 0.1]]))
        rng = np.random.default_rng(3)
        draws = np.array(
            [sample_categorical(logits, rng)[0] for _ in range(20_000)]
        )
        freq = np.bincount(draws, minlength=5) / len(draws)
        assert np.allclose(freq, [0.5, 0.2, 0.1, 0.1, 0.1], atol=0.02)


def small_model(rng=None):
    """Model with narrow layers for fast gradient checks."""
    rng = rng or np.random.default_rng(0)
    actor_spec = nn.MlpSpec((6, 8, 5))
    critic_spec = nn.MlpSpec((6, 8, 1))
    actor_a = nn.init_weights(actor_spec, rng, role="actor_A")
    actor_b = nn.init_weights(actor_spec, rng, role="actor_B")
    critic = nn.init_weights(critic_spec, rng, role="critic")
    return MappoModel(
        actor_a=actor_a, actor_b=actor_b, critic=critic,
        adam_a=nn.AdamState.for_params(actor_a),
        adam_b=nn.AdamState.for_params(actor_b),
        adam_c=nn.AdamState.for_params(critic),
    )


def loss_only(model, obs, actions, old_logp, adv, returns, hyper):
    return ppo_loss(model, obs, actions, old_logp, adv, returns, hyper)[0]


class TestPpoLossGradients:
    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(8)
        hyper = PpoHyper()
        model = small_model(rng)
        B = 6
        obs = rng.standard_normal((B, 6)).astype(np.float32)
        actions = rng.integers(0, 5, size=(B, 2))
        logits_a, _ = nn.forward(model.actor_a, obs)
        logits_b, _ = nn.forward(model.actor_b, obs)
        old_logp = np.stack(
            [
                log_softmax(logits_a)[np.arange(B), actions[:, 0]],
                log_softmax(logits_b)[np.arange(B), actions[:, 1]],
            ],
            axis=1,
        ).astype(np.float64)
        # shift old log-probs so some ratios land in the clipped regime
        old_logp += rng.uniform(-0.3, 0.3, size=old_logp.shape)
        adv = rng.standard_normal(B)
        returns = rng.standard_normal(B)
        _, _, grads = ppo_loss(model, obs, actions, old_logp, adv, returns, hyper)
        nets = (model.actor_a, model.actor_b, model.critic)
        h = 1e-4
        for net, analytic in zip(nets, grads):
            for tensors, a_grads in (
                (net.weights, analytic.d_weights),
                (net.biases, analytic.d_biases),
            ):
                for tensor, grad in zip(tensors, a_grads):
                    flat = tensor.reshape(-1)
                    idx = rng.choice(flat.size, size=min(10, flat.size), replace=False)
                    for i in idx:
                        orig = flat[i]
                        flat[i] = orig + h
                        plus = loss_only(model, obs, actions, old_logp, adv, returns, hyper)
                        flat[i] = orig - h
                        minus = loss_only(model, obs, actions, old_logp, adv, returns, hyper)
                        flat[i] = orig
                        numeric = (plus - minus) / (2 * h)
                        assert grad.reshape(-1)[i] == pytest.approx(
                            numeric, abs=5e-3, rel=5e-3
                        )

    def test_value_loss_is_mse(self):
        rng = np.random.default_rng(4)
        model = small_model(rng)
        obs = rng.standard_normal((4, 6)).astype(np.float32)
        actions = np.zeros((4, 2), dtype=np.int64)
        logits, _ = nn.forward(model.actor_a, obs)
        old = np.stack([log_softmax(logits)[:, 0]] * 2, axis=1)
        returns = rng.standard_normal(4)
        _, diag, _ = ppo_loss(model, obs, actions, old, np.zeros(4), returns,
                              PpoHyper())
        v, _ = nn.forward(model.critic, obs)
        assert diag["value_loss"] == pytest.approx(
            float(np.mean((v[:, 0] - returns) ** 2)), rel=1e-6
        )


class TestRollout:
    def test_buffer_shapes_and_transition_count(self):
        hyper = PpoHyper(rollout_len=128, lanes=32, total_steps=4096)
        model = MappoModel.fresh(np.random.default_rng(0))
        vec = VecEnv(EnvConfig(frogs=2, cars=2), 32, base_seed=7)
        obs = vec.reset()
        buf, _, _ = collect_rollout(vec, model, obs, np.random.default_rng(1), hyper)
        assert buf.obs.shape == (128, 32, OBS_FLAT)
        assert buf.actions.shape == (128, 32, 2)
        assert buf.log_probs.shape == (128, 32, 2)
        assert buf.rewards.size == 4096

    def test_team_reward_is_sum_of_frog_rewards(self):
        hyper = tiny_hyper()
        model = MappoModel.fresh(np.random.default_rng(0))
        vec = VecEnv(EnvConfig(frogs=2, cars=1), hyper.lanes, base_seed=3)
        obs = vec.reset()
        buf, _, _ = collect_rollout(vec, model, obs, np.random.default_rng(2), hyper)
        per_frog = (-100, -1, 0, 1, 100)
        valid_sums = {a + b for a in per_frog for b in per_frog}
        # truncation folds a bootstrap into the reward; none occurs this early
        assert all(r in valid_sums for r in buf.rewards.reshape(-1))

    def test_stored_log_probs_consistent_with_logits(self):
        hyper = tiny_hyper()
        model = MappoModel.fresh(np.random.default_rng(5))
        vec = VecEnv(EnvConfig(frogs=2, cars=2), hyper.lanes, base_seed=9)
        obs = vec.reset()
        buf, _, _ = collect_rollout(vec, model, obs, np.random.default_rng(6), hyper)
        T, N = hyper.rollout_len, hyper.lanes
        flat = buf.obs.reshape(T * N, -1)
        for k, actor in enumerate(model.actors()):
            logits, _ = actor_logits(actor, frog_view(flat, k))
            logp = log_softmax(logits)
            acts = buf.actions[:, :, k].reshape(-1)
            stored = buf.log_probs[:, :, k].reshape(-1)
            assert np.max(np.abs(logp[np.arange(T * N), acts] - stored)) < 1e-6

    def test_first_update_ratio_is_one(self):
        """Before any update, recomputed policy probabilities equal the stored
        ones, so every PPO ratio is 1 and clipping is inactive."""
        hyper = tiny_hyper()
        model = MappoModel.fresh(np.random.default_rng(7))
        vec = VecEnv(EnvConfig(frogs=2, cars=2), hyper.lanes, base_seed=1)
        obs = vec.reset()
        buf, _, _ = collect_rollout(vec, model, obs, np.random.default_rng(8), hyper)
        flat = buf.obs.reshape(-1, OBS_FLAT)
        for k, actor in enumerate(model.actors()):
            logits, _ = actor_logits(actor, frog_view(flat, k))
            logp = log_softmax(logits)
            acts = buf.actions[:, :, k].reshape(-1)
            ratio = np.exp(
                logp[np.arange(len(flat)), acts] - buf.log_probs[:, :, k].reshape(-1)
            )
            assert np.max(np.abs(ratio - 1.0)) <= 1e-5


class TestUpdate:
    def test_advantage_normalisation_stats(self):
        rng = np.random.default_rng(1)
        adv = rng.standard_normal(512) * 7 + 3
        norm = (adv - adv.mean()) / (adv.std() + 1e-8)
        assert abs(norm.mean()) <= 1e-6
        assert abs(norm.std() - 1.0) <= 1e-6

    def test_update_changes_all_three_networks(self):
        hyper = tiny_hyper()
        model = MappoModel.fresh(np.random.default_rng(3))
        before = [net.weights[0].copy()
                  for net in (model.actor_a, model.actor_b, model.critic)]
        vec = VecEnv(EnvConfig(frogs=2, cars=1), hyper.lanes, base_seed=4)
        obs = vec.reset()
        buf, _, _ = collect_rollout(vec, model, obs, np.random.default_rng(5), hyper)
        buf.advantages, buf.returns = compute_gae(
            buf.rewards, buf.values, buf.dones, buf.bootstrap)
        ppo_update(model, buf, hyper, np.random.default_rng(6))
        for prev, net in zip(before, (model.actor_a, model.actor_b, model.critic)):
            assert not np.array_equal(prev, net.weights[0])

    def test_model_has_three_disjoint_parameter_sets(self):
        model = MappoModel.fresh(np.random.default_rng(0), shared=False)
        assert model.actor_a.weights[0] is not model.actor_b.weights[0]
        assert not np.array_equal(model.actor_a.weights[0], model.actor_b.weights[0])
        assert model.critic.spec.layer_sizes[-1] == 1
        assert model.actor_a.spec.layer_sizes == (192, 256, 256, 5)

    def test_shared_init_ties_actor_weights_without_aliasing(self):
        model = MappoModel.fresh(np.random.default_rng(0), shared=True)
        assert model.actor_a.weights[0] is not model.actor_b.weights[0]
        for wa, wb in zip(model.actor_a.weights, model.actor_b.weights):
            assert np.array_equal(wa, wb)


class TestTrainMappo:
    def test_deterministic_for_fixed_seed(self, tmp_path):
        cfg = EnvConfig(frogs=2, cars=1, speeds=(1,))
        m1, _ = train_mappo(cfg, seed=3, hyper=tiny_hyper())
        m2, _ = train_mappo(cfg, seed=3, hyper=tiny_hyper())
        p1, p2 = tmp_path / "a.qfw", tmp_path / "b.qfw"
        nn.save_weights(m1.actor_a, p1)
        nn.save_weights(m2.actor_a, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_single_frog(self):
        with pytest.raises(ValueError):
            train_mappo(EnvConfig(frogs=1, cars=1), seed=0, hyper=tiny_hyper())

    def test_log_rows_per_round(self):
        cfg = EnvConfig(frogs=2, cars=1, speeds=(1,))
        hyper = tiny_hyper(total_steps=256)
        _, log = train_mappo(cfg, seed=1, hyper=hyper)
        assert len(log) == 4  # 256 / (16*4)
        assert log[-1].global_step == 256

    def test_greedy_actions_shape(self):
        model = MappoModel.fresh(np.random.default_rng(1))
        obs = np.zeros((3, OBS_FLAT), dtype=np.float32)
        acts = greedy_joint_actions(model, obs)
        assert acts.shape == (3, 2)
        assert np.all((acts >= 0) & (acts < 5))


class TestMirrorEquivariance:
    def test_mirror_view_is_involution(self):
        from quantumfrog.mappo import mirror_view
        rng = np.random.default_rng(0)
        flat = rng.integers(-2, 3, (10, OBS_FLAT)).astype(np.float32)
        assert np.array_equal(mirror_view(mirror_view(flat)), flat)

    def test_policy_is_reflection_equivariant(self):
        """Reflecting the state reflects the policy: logits on the mirrored
        observation equal the original logits with LEFT and RIGHT swapped."""
        from quantumfrog.mappo import MIRROR_ACTIONS, mirror_view
        rng = np.random.default_rng(1)
        model = MappoModel.fresh(rng)
        flat = rng.integers(-2, 3, (16, OBS_FLAT)).astype(np.float32)
        logits, _ = actor_logits(model.actor_a, flat)
        m_logits, _ = actor_logits(model.actor_a, mirror_view(flat))
        assert np.allclose(m_logits, logits[:, MIRROR_ACTIONS], atol=1e-5)

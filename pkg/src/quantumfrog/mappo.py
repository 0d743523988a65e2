"""Cooperative training: two decentralised actors, one centralised critic,
team reward, GAE, and the clipped PPO objective."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .env import EnvConfig, OBS_FLAT
from .vecenv import VecEnv

NUM_ACTIONS = 5
HIDDEN = (256, 256)


@dataclass(frozen=True)
class PpoHyper:
    clip: float = 0.2
    gae_lambda: float = 0.95
    gamma: float = 0.99
    epochs: int = 4
    minibatch: int = 512
    value_coef: float = 0.5
    entropy_coef: float = 0.05  # annealed linearly to entropy_final over training
    entropy_final: float = 0.01
    lr: float = 1e-3
    grad_clip: float = 0.5
    total_steps: int = 1_000_000
    rollout_len: int = 128
    lanes: int = 32
    eval_every: int = 80_000  # env steps between greedy eval snapshots; 0 disables
    eval_episodes: int = 60
    eval_densities: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    snapshot_step_bar: float = 10.0  # target mean episode length at 2 cars
    snapshot_gap_bar: float = 0.05  # target |win_A - win_B| at every density
    snapshot_win_floor: float = 0.5  # minimum 2-car joint win to count as converged
    share_actor_params: bool = True  # tie actor updates; per-frog views stay distinct


@dataclass
class MappoModel:
    actor_a: nn.PolicyWeights
    actor_b: nn.PolicyWeights
    critic: nn.PolicyWeights
    adam_a: nn.AdamState
    adam_b: nn.AdamState
    adam_c: nn.AdamState

    @classmethod
    def fresh(cls, rng: np.random.Generator, shared: bool = True) -> "MappoModel":
        actor_spec = nn.MlpSpec((OBS_FLAT, *HIDDEN, NUM_ACTIONS))
        critic_spec = nn.MlpSpec((OBS_FLAT, *HIDDEN, 1))
        actor_a = nn.init_weights(actor_spec, rng, role="actor_A")
        actor_b = nn.init_weights(actor_spec, rng, role="actor_B")
        if shared:
            # Tied actors must start from identical weights; they then stay
            # identical under the mean-gradient update in ppo_update.
            actor_b.weights = [w.copy() for w in actor_a.weights]
            actor_b.biases = [b.copy() for b in actor_a.biases]
        critic = nn.init_weights(critic_spec, rng, role="critic")
        # Near-zero output layers give a near-uniform initial policy, so early
        # updates are driven by advantages rather than by the random init.
        for actor in (actor_a, actor_b):
            actor.weights[-1] *= 0.01
            actor.biases[-1][:] = 0.0
        return cls(
            actor_a=actor_a,
            actor_b=actor_b,
            critic=critic,
            adam_a=nn.AdamState.for_params(actor_a),
            adam_b=nn.AdamState.for_params(actor_b),
            adam_c=nn.AdamState.for_params(critic),
        )

    def actors(self) -> tuple[nn.PolicyWeights, nn.PolicyWeights]:
        return self.actor_a, self.actor_b

    def snapshot(self) -> tuple[nn.PolicyWeights, nn.PolicyWeights, nn.PolicyWeights]:
        return self.actor_a.copy(), self.actor_b.copy(), self.critic.copy()

    def restore(self, nets: tuple[nn.PolicyWeights, nn.PolicyWeights, nn.PolicyWeights]) -> None:
        self.actor_a, self.actor_b, self.critic = nets


FROG_CHANNEL = 64  # flattened length of observation channel 0 (8x8 frog ids)


def frog_view(flat_obs: np.ndarray, frog_index: int) -> np.ndarray:
    """Per-frog observation view: the acting frog always appears with id 1
    and its partner with id 2 in the frog channel. Swapping the labels lets
    a single policy serve both roles while execution stays decentralised —
    each frog still acts from its own view of the global state."""
    if frog_index == 0:
        return flat_obs
    view = flat_obs.copy()
    channel = view[:, :FROG_CHANNEL]
    ones = channel == 1.0
    twos = channel == 2.0
    channel[ones] = 2.0
    channel[twos] = 1.0
    return view


MIRROR_ACTIONS = np.array([0, 1, 3, 2, 4])  # LEFT <-> RIGHT under reflection


def mirror_view(flat_obs: np.ndarray) -> np.ndarray:
    """Column-reflected presentation of a flat observation batch: grid
    columns reversed and car velocities negated. The environment is
    statistically invariant under this reflection (car columns, directions
    and speeds are sampled symmetrically, and the two start columns map onto
    each other), so a reflected state is an equally valid game position."""
    grid = flat_obs.reshape(-1, 3, 8, 8)[:, :, :, ::-1].copy()
    grid[:, 2] *= -1
    return grid.reshape(len(flat_obs), -1)


def actor_logits(actor: nn.PolicyWeights, view: np.ndarray):
    """Actor head averaged over the two mirror presentations of the state,
    which makes the policy exactly equivariant under column reflection.
    Combined with tied actor weights and per-frog views, the two frogs'
    expected win rates are then equal by construction: frog B's start is the
    mirror image of frog A's."""
    if view.shape[1] != OBS_FLAT:
        # Non-grid inputs (reduced test harnesses) have no mirror image.
        logits, cache = nn.forward(actor, view)
        return logits, (cache, None)
    logits, cache = nn.forward(actor, view)
    m_logits, m_cache = nn.forward(actor, mirror_view(view))
    avg = 0.5 * (logits + m_logits[:, MIRROR_ACTIONS])
    return avg, (cache, m_cache)


def actor_logits_backward(actor: nn.PolicyWeights, caches, grad_logits: np.ndarray):
    cache, m_cache = caches
    if m_cache is None:
        return nn.backward(actor, cache, grad_logits)
    grads = nn.backward(actor, cache, 0.5 * grad_logits)
    # MIRROR_ACTIONS is an involution, so it is its own inverse permutation.
    m_grads = nn.backward(actor, m_cache, 0.5 * grad_logits[:, MIRROR_ACTIONS])
    grads.add_inplace(m_grads)
    return grads


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def sample_categorical(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    probs = np.exp(log_softmax(logits))
    cdf = np.cumsum(probs, axis=1)
    u = rng.random((len(logits), 1))
    return (u > cdf[:, :-1]).sum(axis=1).astype(np.int64)


def entropy(logits: np.ndarray) -> np.ndarray:
    logp = log_softmax(logits)
    return -(np.exp(logp) * logp).sum(axis=1)


def clipped_surrogate(ratio: np.ndarray, advantage: np.ndarray, clip: float) -> np.ndarray:
    """Per-sample PPO objective: min(rho*A, clip(rho, 1-eps, 1+eps)*A)."""
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantage)


@dataclass
class RolloutBuffer:
    obs: np.ndarray  # (T, N, 192) float32
    actions: np.ndarray  # (T, N, 2) int64
    log_probs: np.ndarray  # (T, N, 2) float32
    rewards: np.ndarray  # (T, N) team reward (truncation bootstrap folded in)
    values: np.ndarray  # (T, N)
    dones: np.ndarray  # (T, N) episode ended after this step
    bootstrap: np.ndarray  # (N,) critic value past the last step, 0 if terminated
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap: np.ndarray,
    gamma: float = 0.99,
    lam: float = 0.95,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward GAE recursion over a (T, N) rollout.

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
    A_t     = delta_t + gamma * lam * (1 - done_t) * A_{t+1}
    """
    T = len(rewards)
    adv = np.zeros_like(values)
    next_value = np.asarray(bootstrap, dtype=np.float64)
    next_adv = np.zeros(values.shape[1:], dtype=np.float64)
    for t in range(T - 1, -1, -1):
        mask = 1.0 - dones[t].astype(np.float64)
        delta = rewards[t] + gamma * next_value * mask - values[t]
        next_adv = delta + gamma * lam * mask * next_adv
        adv[t] = next_adv
        next_value = values[t].astype(np.float64)
    returns = adv + values
    return adv, returns


def critic_values(
    model: MappoModel, flat_obs: np.ndarray,
    value_shift: float = 0.0, value_scale: float = 1.0,
) -> np.ndarray:
    """Critic output mapped back to raw-return units. The critic is trained on
    normalised targets; shift/scale de-normalise its predictions."""
    v, _ = nn.forward(model.critic, flat_obs)
    return v[:, 0] * value_scale + value_shift


def collect_rollout(
    vec: VecEnv, model: MappoModel, obs: np.ndarray, rng: np.random.Generator,
    hyper: PpoHyper, value_shift: float = 0.0, value_scale: float = 1.0,
) -> tuple[RolloutBuffer, np.ndarray, dict]:
    """Gather T x N joint transitions. Returns (buffer, next obs batch,
    episode stats). Where a lane is truncated mid-rollout, the bootstrap
    value of the terminal observation is folded into that step's reward so
    the GAE recursion can treat it as done."""
    T, N = hyper.rollout_len, hyper.lanes
    buf = RolloutBuffer(
        obs=np.zeros((T, N, OBS_FLAT), dtype=np.float32),
        actions=np.zeros((T, N, 2), dtype=np.int64),
        log_probs=np.zeros((T, N, 2), dtype=np.float32),
        rewards=np.zeros((T, N)),
        values=np.zeros((T, N)),
        dones=np.zeros((T, N), dtype=bool),
        bootstrap=np.zeros(N),
    )
    ep_returns: list[float] = []
    ep_wins: list[int] = []
    ep_lens: list[int] = []
    lane_return = getattr(vec, "_mappo_lane_return", np.zeros(N))
    lane_len = getattr(vec, "_mappo_lane_len", np.zeros(N, dtype=int))

    for t in range(T):
        flat = obs.reshape(N, -1).astype(np.float32)
        buf.obs[t] = flat
        buf.values[t] = critic_values(model, flat, value_shift, value_scale)
        for k, actor in enumerate(model.actors()):
            logits, _ = actor_logits(actor, frog_view(flat, k))
            logp = log_softmax(logits)
            acts = sample_categorical(logits, rng)
            buf.actions[t, :, k] = acts
            buf.log_probs[t, :, k] = logp[np.arange(N), acts]
        next_obs, results = vec.step(buf.actions[t])
        for lane, res in enumerate(results):
            team = float(sum(res.rewards))
            buf.rewards[t, lane] = team
            buf.dones[t, lane] = res.terminated or res.truncated
            lane_return[lane] += team
            lane_len[lane] += 1
            if res.truncated:
                term_flat = res.observation.reshape(1, -1).astype(np.float32)
                buf.rewards[t, lane] += hyper.gamma * float(
                    critic_values(model, term_flat, value_shift, value_scale)[0]
                )
            if res.terminated or res.truncated:
                ep_returns.append(float(lane_return[lane]))
                ep_wins.append(int(res.outcome.name == "SUCCESS"))
                ep_lens.append(int(lane_len[lane]))
                lane_return[lane] = 0.0
                lane_len[lane] = 0
        obs = next_obs

    vec._mappo_lane_return = lane_return
    vec._mappo_lane_len = lane_len
    final_flat = obs.reshape(N, -1).astype(np.float32)
    # Lanes whose last step ended are masked by the done flag anyway.
    buf.bootstrap = critic_values(model, final_flat, value_shift, value_scale)
    stats = {"returns": ep_returns, "wins": ep_wins, "lens": ep_lens}
    return buf, obs, stats


def ppo_loss(
    model: MappoModel,
    obs: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    hyper: PpoHyper,
) -> tuple[float, dict, tuple[nn.Gradients, nn.Gradients, nn.Gradients]]:
    """Combined loss of Eq.: actor_A + actor_B + value_coef * critic MSE
    - entropy_coef * (H_A + H_B), plus its gradients for all three nets."""
    B = len(obs)
    total_loss = 0.0
    clip_hits = 0
    entropies = []
    actor_grads = []
    for k, actor in enumerate(model.actors()):
        logits, cache = actor_logits(actor, frog_view(obs, k))
        logp_all = log_softmax(logits)
        probs = np.exp(logp_all)
        acts = actions[:, k]
        logp = logp_all[np.arange(B), acts]
        ratio = np.exp(logp.astype(np.float64) - old_log_probs[:, k])
        unclipped = ratio * advantages
        clipped = np.clip(ratio, 1.0 - hyper.clip, 1.0 + hyper.clip) * advantages
        objective = np.minimum(unclipped, clipped)
        actor_loss = -float(np.mean(objective))
        clip_hits += int(np.sum(unclipped > clipped))

        ent = -(probs * logp_all).sum(axis=1)
        mean_ent = float(np.mean(ent))
        entropies.append(mean_ent)
        total_loss += actor_loss - hyper.entropy_coef * mean_ent

        # d(actor_loss)/d logp: gradient flows only where the min picked the
        # unclipped term (where clipping is active the objective is constant).
        flow = (unclipped <= clipped).astype(np.float64)
        dlogp = -(advantages * ratio * flow) / B
        # d(-c * H)/d z_j = c * p_j * (logp_j + H)
        grad_logits = hyper.entropy_coef * probs * (logp_all + ent[:, None]) / B
        grad_logits += dlogp[:, None] * (
            (np.arange(NUM_ACTIONS)[None, :] == acts[:, None]) - probs
        )
        actor_grads.append(actor_logits_backward(actor, cache, grad_logits))

    v, v_cache = nn.forward(model.critic, obs)
    v = v[:, 0]
    v_err = v.astype(np.float64) - returns
    value_loss = float(np.mean(np.square(v_err)))
    total_loss += hyper.value_coef * value_loss
    grad_v = (hyper.value_coef * 2.0 * v_err / B)[:, None]
    critic_grads = nn.backward(model.critic, v_cache, grad_v)

    if not np.isfinite(total_loss):
        raise FloatingPointError("non-finite PPO loss; training aborted")
    diag = {
        "clip_fraction": clip_hits / (2 * B),
        "entropy_A": entropies[0],
        "entropy_B": entropies[1],
        "value_loss": value_loss,
    }
    return total_loss, diag, (actor_grads[0], actor_grads[1], critic_grads)


def _clip_joint(grads: tuple[nn.Gradients, ...], max_norm: float) -> None:
    total = sum(g.global_norm() ** 2 for g in grads)
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for g in grads:
            g.scale_inplace(scale)


def ppo_update(model: MappoModel, buf: RolloutBuffer, hyper: PpoHyper,
               rng: np.random.Generator) -> dict:
    """4 epochs of shuffled minibatch updates over one rollout."""
    T, N = buf.rewards.shape
    obs = buf.obs.reshape(T * N, -1)
    actions = buf.actions.reshape(T * N, 2)
    old_logp = buf.log_probs.reshape(T * N, 2).astype(np.float64)
    advantages = buf.advantages.reshape(T * N)
    returns = buf.returns.reshape(T * N)
    last_diag: dict = {}
    for _ in range(hyper.epochs):
        order = rng.permutation(T * N)
        for start in range(0, T * N, hyper.minibatch):
            idx = order[start : start + hyper.minibatch]
            adv = advantages[idx]
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            _, diag, grads = ppo_loss(
                model, obs[idx], actions[idx], old_logp[idx], adv, returns[idx], hyper
            )
            _clip_joint(grads, hyper.grad_clip)
            if hyper.share_actor_params:
                # Tied actors: both receive the mean of the two role
                # gradients, so weights that start identical stay identical.
                grads[0].add_inplace(grads[1])
                grads[0].scale_inplace(0.5)
                nn.adam_step(model.actor_a, grads[0], model.adam_a, hyper.lr)
                nn.adam_step(model.actor_b, grads[0], model.adam_b, hyper.lr)
            else:
                nn.adam_step(model.actor_a, grads[0], model.adam_a, hyper.lr)
                nn.adam_step(model.actor_b, grads[1], model.adam_b, hyper.lr)
            nn.adam_step(model.critic, grads[2], model.adam_c, hyper.lr)
            last_diag = diag
    return last_diag


@dataclass
class MappoLogRow:
    global_step: int
    mean_team_return: float
    clip_fraction: float
    entropy_a: float
    entropy_b: float
    value_loss: float
    eval_joint_win: float


def write_log_csv(path, rows: list[MappoLogRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["global_step", "mean_team_return", "clip_fraction", "entropy_A",
             "entropy_B", "value_loss", "eval_joint_win"]
        )
        for r in rows:
            writer.writerow(
                [r.global_step, f"{r.mean_team_return:.4f}", f"{r.clip_fraction:.4f}",
                 f"{r.entropy_a:.4f}", f"{r.entropy_b:.4f}", f"{r.value_loss:.4f}",
                 f"{r.eval_joint_win:.4f}"]
            )


class ValueNormalizer:
    """Running mean/std of empirical returns. The critic regresses normalised
    targets; raw-unit predictions come from de-normalising its output.
    Without this, value errors on the order of the terminal rewards (±100)
    dominate the 0.5 joint gradient clip and the actors barely move."""

    def __init__(self) -> None:
        self.mean = 0.0
        self.var = 1.0
        self.count = 1e-4

    @property
    def std(self) -> float:
        return float(np.sqrt(self.var) + 1e-8)

    def update(self, batch: np.ndarray) -> None:
        batch = batch.reshape(-1)
        b_mean, b_var, b_n = float(batch.mean()), float(batch.var()), batch.size
        delta = b_mean - self.mean
        total = self.count + b_n
        self.mean += delta * b_n / total
        self.var = (
            self.var * self.count + b_var * b_n + delta**2 * self.count * b_n / total
        ) / total
        self.count = total

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std


def _snapshot_seed(seed: int) -> int:
    """Snapshot evals roll in their own seed space, disjoint from training."""
    digest = hashlib.blake2b(f"snapshot-eval:{seed}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") % (2**63 - 1)


def _snapshot_score(
    model: MappoModel, env_config: EnvConfig, hyper: PpoHyper, base_seed: int
) -> tuple:
    """Greedy-eval score for snapshot selection, compared lexicographically:
    first meet the per-frog win-rate gap bar at every density and the
    episode-length bar at 2 cars, then maximise the 2-car joint win rate."""
    from .evaluation import MappoPolicy, evaluate_densities

    report = evaluate_densities(
        MappoPolicy.from_model(model), env_config, hyper.eval_densities,
        episodes=hyper.eval_episodes, base_seed=base_seed,
    )
    worst_gap = max(abs(r.win_a - r.win_b) for r in report.rows)
    two_car = next((r for r in report.rows if r.cars == 2), report.rows[0])
    feasible = (
        worst_gap <= hyper.snapshot_gap_bar
        and two_car.avg_steps <= hyper.snapshot_step_bar
        and two_car.joint_win >= hyper.snapshot_win_floor
    )
    penalty = 2.0 * max(0.0, worst_gap - hyper.snapshot_gap_bar)
    penalty += 0.02 * max(0.0, two_car.avg_steps - hyper.snapshot_step_bar)
    return (feasible, two_car.joint_win - penalty)


def train_mappo(
    env_config: EnvConfig,
    seed: int,
    hyper: PpoHyper = PpoHyper(),
) -> tuple[MappoModel, list[MappoLogRow]]:
    """Stage-5 cooperative trainer: collect -> GAE -> clipped PPO epochs.

    Returns the best periodic eval snapshot, not necessarily the final
    weights; the entropy coefficient anneals linearly from entropy_coef to
    entropy_final so exploration decays as the policies sharpen."""
    if env_config.frogs != 2:
        raise ValueError("train_mappo needs a two-frog environment")
    seq = np.random.SeedSequence(seed)
    init_rng, act_rng, shuffle_rng, env_key = (np.random.default_rng(s) for s in seq.spawn(4))
    model = MappoModel.fresh(init_rng, shared=hyper.share_actor_params)
    vec = VecEnv(env_config, hyper.lanes, int(env_key.integers(0, 2**63 - 1)))
    obs = vec.reset()

    log: list[MappoLogRow] = []
    recent_wins: list[int] = []
    normalizer = ValueNormalizer()
    snap_seed = _snapshot_seed(seed)
    next_eval = hyper.eval_every or None
    best_score: tuple | None = None
    best_nets = None
    best_step = 0
    global_step = 0
    while global_step < hyper.total_steps:
        frac = global_step / hyper.total_steps
        step_hyper = replace(
            hyper,
            entropy_coef=hyper.entropy_coef
            + (hyper.entropy_final - hyper.entropy_coef) * frac,
        )
        buf, obs, stats = collect_rollout(
            vec, model, obs, act_rng, step_hyper,
            value_shift=normalizer.mean, value_scale=normalizer.std,
        )
        buf.advantages, buf.returns = compute_gae(
            buf.rewards, buf.values, buf.dones, buf.bootstrap,
            hyper.gamma, hyper.gae_lambda,
        )
        normalizer.update(buf.returns)
        buf.returns = normalizer.normalize(buf.returns)
        diag = ppo_update(model, buf, step_hyper, shuffle_rng)
        global_step += hyper.rollout_len * hyper.lanes
        if next_eval is not None and global_step >= next_eval:
            score = _snapshot_score(model, env_config, hyper, snap_seed)
            if best_score is None or score > best_score:
                best_score, best_nets = score, model.snapshot()
                best_step = global_step
            next_eval += hyper.eval_every
        recent_wins.extend(stats["wins"])
        recent_wins = recent_wins[-200:]
        log.append(
            MappoLogRow(
                global_step=global_step,
                mean_team_return=float(np.mean(stats["returns"])) if stats["returns"] else 0.0,
                clip_fraction=diag.get("clip_fraction", 0.0),
                entropy_a=diag.get("entropy_A", 0.0),
                entropy_b=diag.get("entropy_B", 0.0),
                value_loss=diag.get("value_loss", 0.0),
                eval_joint_win=float(np.mean(recent_wins)) if recent_wins else 0.0,
            )
        )
    if best_nets is not None:
        model.restore(best_nets)
        final_step = best_step
    else:
        final_step = global_step
    for net in (model.actor_a, model.actor_b, model.critic):
        net.step = final_step
    return model, log


def greedy_joint_actions(model: MappoModel, obs_batch: np.ndarray) -> np.ndarray:
    """Deterministic evaluation actions: per-actor argmax over logits."""
    flat = obs_batch.reshape(len(obs_batch), -1).astype(np.float32)
    out = np.zeros((len(obs_batch), 2), dtype=np.int64)
    for k, actor in enumerate(model.actors()):
        logits, _ = actor_logits(actor, frog_view(flat, k))
        out[:, k] = logits.argmax(axis=1)
    return out

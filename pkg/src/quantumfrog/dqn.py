"""DQN (single agent) and IDQN (two fully independent learners).

Both trainers drive a vectorised rollout; gradient steps are granted by a
step accumulator so that one update happens per 4 environment steps
regardless of lane count.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .env import EnvConfig, FrogStatus, OBS_FLAT
from .vecenv import VecEnv

NUM_ACTIONS = 5
HIDDEN = (256, 256)


@dataclass(frozen=True)
class LinearEpsSchedule:
    start: float = 1.0
    end: float = 0.05
    horizon: int = 45_000  # 0.30 * total steps by default

    def value(self, step: int) -> float:
        frac = min(1.0, step / self.horizon)
        return self.start + (self.end - self.start) * frac


@dataclass(frozen=True)
class DqnHyper:
    total_steps: int = 150_000
    lanes: int = 32
    buffer_capacity: int = 100_000
    batch_size: int = 128
    lr: float = 1e-3
    gamma: float = 0.85
    train_frequency: int = 2
    target_sync: int = 500  # gradient steps between target-network refreshes
    grad_clip: float = 10.0
    warmup: int = 1_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.60
    eval_every: int = 5_000  # env steps between greedy eval snapshots; 0 disables
    eval_episodes: int = 100
    eval_densities: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    snapshot_step_bar: float = 8.0  # snapshot qualifies when avg steps <= bar everywhere

    def schedule(self) -> LinearEpsSchedule:
        return LinearEpsSchedule(
            self.eps_start, self.eps_end, max(1, int(self.eps_fraction * self.total_steps))
        )


class ReplayBuffer:
    """Uniform-with-replacement ring buffer. Observations kept as int8 and
    widened to float32 at sample time."""

    def __init__(self, capacity: int, rng: np.random.Generator):
        self.capacity = capacity
        self.obs = np.zeros((capacity, OBS_FLAT), dtype=np.int8)
        self.next_obs = np.zeros((capacity, OBS_FLAT), dtype=np.int8)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0
        self._rng = rng

    def push(self, obs, action, reward, next_obs, done) -> None:
        i = self.cursor
        self.obs[i] = np.asarray(obs, dtype=np.int8).reshape(-1)
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = np.asarray(next_obs, dtype=np.int8).reshape(-1)
        self.dones[i] = done
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int):
        idx = self._rng.integers(0, self.size, size=batch_size)
        return (
            self.obs[idx].astype(np.float32),
            self.actions[idx],
            self.rewards[idx],
            self.next_obs[idx].astype(np.float32),
            self.dones[idx],
        )


def td_targets(
    rewards: np.ndarray,
    next_obs: np.ndarray,
    dones: np.ndarray,
    target_params: nn.PolicyWeights,
    gamma: float = 0.99,
) -> np.ndarray:
    """y = r + gamma * max_a Q_target(s', a) * (1 - done)."""
    next_q, _ = nn.forward(target_params, next_obs)
    return rewards + gamma * next_q.max(axis=1) * (~np.asarray(dones, dtype=bool))


@dataclass
class DqnAgent:
    online: nn.PolicyWeights
    target: nn.PolicyWeights
    adam: nn.AdamState
    hyper: DqnHyper

    @classmethod
    def fresh(cls, rng: np.random.Generator, hyper: DqnHyper, role: str = "q") -> "DqnAgent":
        spec = nn.MlpSpec((OBS_FLAT, *HIDDEN, NUM_ACTIONS))
        online = nn.init_weights(spec, rng, role=role)
        return cls(online=online, target=online.copy(), adam=nn.AdamState.for_params(online), hyper=hyper)

    def sync_target(self) -> None:
        self.target = self.online.copy()

    def greedy_actions(self, obs_batch: np.ndarray) -> np.ndarray:
        q, _ = nn.forward(self.online, obs_batch.reshape(len(obs_batch), -1).astype(np.float32))
        return q.argmax(axis=1)

    def gradient_step(self, buffer: ReplayBuffer) -> float:
        h = self.hyper
        obs, actions, rewards, next_obs, dones = buffer.sample(h.batch_size)
        targets = td_targets(rewards, next_obs, dones, self.target, h.gamma)
        q, cache = nn.forward(self.online, obs)
        picked = q[np.arange(len(actions)), actions]
        err = picked - targets
        loss = float(np.mean(np.square(err, dtype=np.float64)))
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite DQN loss; training aborted")
        grad_out = np.zeros_like(q)
        grad_out[np.arange(len(actions)), actions] = 2.0 * err / len(actions)
        grads = nn.backward(self.online, cache, grad_out)
        nn.clip_grad_norm(grads, h.grad_clip)
        nn.adam_step(self.online, grads, self.adam, h.lr)
        return loss


@dataclass
class DqnLogRow:
    global_step: int
    episode_count: int
    epsilon: float
    mean_loss: float
    rolling_win_rate: float
    rolling_ep_len: float


def write_log_csv(path, rows: list[DqnLogRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["global_step", "episode_count", "epsilon", "mean_loss", "rolling_win_rate", "rolling_ep_len"]
        )
        for r in rows:
            writer.writerow(
                [r.global_step, r.episode_count, f"{r.epsilon:.6f}", f"{r.mean_loss:.6f}",
                 f"{r.rolling_win_rate:.4f}", f"{r.rolling_ep_len:.2f}"]
            )


class _EpisodeStats:
    """Rolling joint-win / episode-length window over finished lane episodes."""

    def __init__(self, window: int = 200):
        self.window = window
        self.wins: list[int] = []
        self.lens: list[int] = []
        self.count = 0

    def record(self, won: bool, length: int) -> None:
        self.count += 1
        self.wins.append(int(won))
        self.lens.append(length)
        if len(self.wins) > self.window:
            self.wins.pop(0)
            self.lens.pop(0)

    @property
    def win_rate(self) -> float:
        return float(np.mean(self.wins)) if self.wins else 0.0

    @property
    def mean_len(self) -> float:
        return float(np.mean(self.lens)) if self.lens else 0.0


def _snapshot_seed(seed: int) -> int:
    """Snapshot evals roll in their own seed space, disjoint from training."""
    digest = hashlib.blake2b(f"snapshot-eval:{seed}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") % (2**63 - 1)


def _snapshot_score(params: nn.PolicyWeights, env_config: EnvConfig,
                    hyper: DqnHyper, base_seed: int) -> tuple:
    """Greedy-eval score for snapshot selection, compared lexicographically:
    meet the episode-length bar at every density first, then maximise the
    mean win rate, then prefer shorter episodes."""
    from .evaluation import DqnGreedyPolicy, evaluate_densities

    report = evaluate_densities(
        DqnGreedyPolicy(params), env_config, hyper.eval_densities,
        episodes=hyper.eval_episodes, base_seed=base_seed,
    )
    worst_steps = max(r.avg_steps for r in report.rows)
    mean_win = float(np.mean([r.joint_win for r in report.rows]))
    excess = max(0.0, worst_steps - hyper.snapshot_step_bar)
    return (worst_steps <= hyper.snapshot_step_bar, mean_win - 0.05 * excess, -worst_steps)


def train_dqn(
    env_config: EnvConfig,
    seed: int,
    hyper: DqnHyper = DqnHyper(),
    log_every: int = 5_000,
) -> tuple[DqnAgent, list[DqnLogRow]]:
    """Stage-3 single-agent DQN. Returns the best periodic eval snapshot,
    not necessarily the final weights: greedy play can drift late in
    training once epsilon has annealed away."""
    if env_config.frogs != 1:
        raise ValueError("train_dqn is single-frog; use train_idqn for two frogs")
    seq = np.random.SeedSequence(seed)
    init_rng, buf_rng, eps_rng, env_key = (np.random.default_rng(s) for s in seq.spawn(4))
    agent = DqnAgent.fresh(init_rng, hyper)
    buffer = ReplayBuffer(hyper.buffer_capacity, buf_rng)
    schedule = hyper.schedule()
    vec = VecEnv(env_config, hyper.lanes, int(env_key.integers(0, 2**63 - 1)))
    obs = vec.reset()

    stats = _EpisodeStats()
    lane_steps = np.zeros(hyper.lanes, dtype=int)
    log: list[DqnLogRow] = []
    losses: list[float] = []
    global_step = 0
    grad_budget = 0.0
    grad_steps = 0
    last_sync = 0
    next_log = log_every
    snap_seed = _snapshot_seed(seed)
    next_eval = hyper.eval_every or None
    best_score: tuple | None = None
    best_params: nn.PolicyWeights | None = None
    best_step = 0

    while global_step < hyper.total_steps:
        eps = schedule.value(global_step)
        flat = obs.reshape(hyper.lanes, -1).astype(np.float32)
        actions = agent.greedy_actions(flat)
        explore = eps_rng.random(hyper.lanes) < eps
        actions[explore] = eps_rng.integers(0, NUM_ACTIONS, size=int(explore.sum()))

        next_obs, results = vec.step(actions.reshape(-1, 1))
        for lane, res in enumerate(results):
            buffer.push(obs[lane], actions[lane], res.rewards[0], res.observation,
                        res.terminated)
            lane_steps[lane] += 1
            if res.terminated or res.truncated:
                stats.record(res.outcome.name == "SUCCESS", int(lane_steps[lane]))
                lane_steps[lane] = 0
        obs = next_obs
        global_step += hyper.lanes

        grad_budget += hyper.lanes / hyper.train_frequency
        while grad_budget >= 1.0:
            grad_budget -= 1.0
            if buffer.size >= max(hyper.warmup, hyper.batch_size):
                losses.append(agent.gradient_step(buffer))
                grad_steps += 1
                # Sync on training steps, not env steps: a target that
                # chases the online net every few updates never settles.
                if grad_steps - last_sync >= hyper.target_sync:
                    agent.sync_target()
                    last_sync = grad_steps
        if global_step >= next_log:
            log.append(DqnLogRow(global_step, stats.count, eps,
                                 float(np.mean(losses)) if losses else 0.0,
                                 stats.win_rate, stats.mean_len))
            losses.clear()
            next_log += log_every
        if next_eval is not None and global_step >= next_eval:
            score = _snapshot_score(agent.online, env_config, hyper, snap_seed)
            if best_score is None or score > best_score:
                best_score, best_params = score, agent.online.copy()
                best_step = global_step
            next_eval += hyper.eval_every
    if best_params is not None:
        agent.online = best_params
        agent.sync_target()
        agent.online.step = best_step
    else:
        agent.online.step = global_step
    return agent, log


def idqn_default_hyper(total_steps: int = 200_000) -> DqnHyper:
    """Stage-4 defaults. Independent learners keep the plain-DQN reference
    settings; there is no snapshot selection because the nonstationary
    two-learner system has no single meaningful eval criterion mid-run."""
    return DqnHyper(
        total_steps=total_steps,
        gamma=0.99,
        train_frequency=4,
        eps_fraction=0.30,
        eval_every=0,
    )


def train_idqn(
    env_config: EnvConfig,
    seed: int,
    hyper: DqnHyper | None = None,
    log_every: int = 5_000,
) -> tuple[tuple[DqnAgent, DqnAgent], list[DqnLogRow]]:
    """Stage-4 independent DQN: two agents with disjoint networks, buffers,
    optimizers and reward streams, acting jointly in a two-frog env. Each
    agent trains only on its own reward."""
    if env_config.frogs != 2:
        raise ValueError("train_idqn needs a two-frog environment")
    if hyper is None:
        hyper = idqn_default_hyper()
    seq = np.random.SeedSequence(seed)
    (init_a, init_b, buf_a, buf_b, eps_a, eps_b, env_key) = (
        np.random.default_rng(s) for s in seq.spawn(7)
    )
    agents = (
        DqnAgent.fresh(init_a, hyper, role="q_A"),
        DqnAgent.fresh(init_b, hyper, role="q_B"),
    )
    buffers = (
        ReplayBuffer(hyper.buffer_capacity, buf_a),
        ReplayBuffer(hyper.buffer_capacity, buf_b),
    )
    eps_rngs = (eps_a, eps_b)
    schedule = hyper.schedule()
    vec = VecEnv(env_config, hyper.lanes, int(env_key.integers(0, 2**63 - 1)))
    obs = vec.reset()

    stats = _EpisodeStats()
    lane_steps = np.zeros(hyper.lanes, dtype=int)
    log: list[DqnLogRow] = []
    losses: list[float] = []
    global_step = 0
    grad_budget = 0.0
    grad_steps = 0
    last_sync = 0
    next_log = log_every

    while global_step < hyper.total_steps:
        eps = schedule.value(global_step)
        flat = obs.reshape(hyper.lanes, -1).astype(np.float32)
        joint = np.zeros((hyper.lanes, 2), dtype=np.int64)
        for k, agent in enumerate(agents):
            acts = agent.greedy_actions(flat)
            explore = eps_rngs[k].random(hyper.lanes) < eps
            acts[explore] = eps_rngs[k].integers(0, NUM_ACTIONS, size=int(explore.sum()))
            joint[:, k] = acts

        # Snapshot which frogs were still playing; finished frogs get no
        # transition (their action was never applied).
        was_active = [
            [f.status == FrogStatus.ACTIVE for f in env.state.frogs]
            for env in vec.envs
        ]
        next_obs, results = vec.step(joint)
        for lane, res in enumerate(results):
            for k in range(2):
                if was_active[lane][k]:
                    buffers[k].push(obs[lane], joint[lane][k], res.rewards[k],
                                    res.observation, res.terminated)
            lane_steps[lane] += 1
            if res.terminated or res.truncated:
                stats.record(res.outcome.name == "SUCCESS", int(lane_steps[lane]))
                lane_steps[lane] = 0
        obs = next_obs
        global_step += hyper.lanes

        grad_budget += hyper.lanes / hyper.train_frequency
        while grad_budget >= 1.0:
            grad_budget -= 1.0
            trained = False
            for agent, buffer in zip(agents, buffers):
                if buffer.size >= max(hyper.warmup, hyper.batch_size):
                    losses.append(agent.gradient_step(buffer))
                    trained = True
            if trained:
                grad_steps += 1
                if grad_steps - last_sync >= hyper.target_sync:
                    for agent in agents:
                        agent.sync_target()
                    last_sync = grad_steps
        if global_step >= next_log:
            log.append(DqnLogRow(global_step, stats.count, eps,
                                 float(np.mean(losses)) if losses else 0.0,
                                 stats.win_rate, stats.mean_len))
            losses.clear()
            next_log += log_every
    for agent in agents:
        agent.online.step = global_step
    return agents, log

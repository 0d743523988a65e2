"""One-step Q-Learning over exact observation keys (curriculum stages 1-2)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import Action, EnvConfig, QuantumFrogEnv, canonical_key

NUM_ACTIONS = len(Action)


@dataclass(frozen=True)
class EpsilonDecaySchedule:
    eps0: float = 1.0
    eps_min: float = 0.01
    decay: float = 0.9995  # multiplicative, per episode

    def value(self, episode: int) -> float:
        return max(self.eps_min, self.eps0 * self.decay**episode)


class QTable:
    """Hash map from canonical observation key to a length-5 action-value
    vector; absent keys read as all-zero."""

    def __init__(self):
        self._table: dict[bytes, np.ndarray] = {}

    def values(self, key: bytes) -> np.ndarray:
        row = self._table.get(key)
        if row is None:
            return np.zeros(NUM_ACTIONS)
        return row

    def __len__(self) -> int:
        return len(self._table)

    def _row(self, key: bytes) -> np.ndarray:
        row = self._table.get(key)
        if row is None:
            row = np.zeros(NUM_ACTIONS)
            self._table[key] = row
        return row

    def update(
        self,
        key: bytes,
        action: int,
        reward: float,
        next_key: bytes,
        done: bool,
        alpha: float = 0.1,
        gamma: float = 0.99,
    ) -> float:
        """Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)); the
        bootstrap term is dropped at terminal states."""
        if not np.isfinite(reward):
            raise ValueError(f"non-finite reward {reward}")
        row = self._row(key)
        bootstrap = 0.0 if done else gamma * float(np.max(self.values(next_key)))
        row[action] += alpha * (reward + bootstrap - row[action])
        return float(row[action])

    def greedy_action(self, key: bytes) -> int:
        return int(np.argmax(self.values(key)))  # argmax breaks ties low

    def select_action(self, key: bytes, epsilon: float, rng: np.random.Generator) -> int:
        if rng.random() < epsilon:
            return int(rng.integers(0, NUM_ACTIONS))
        return self.greedy_action(key)

    def save(self, path) -> None:
        """Line-oriented text dump: hex key, then the 5 values, sorted by key."""
        with open(path, "w") as fh:
            for key in sorted(self._table):
                vals = " ".join(repr(float(v)) for v in self._table[key])
                fh.write(f"{key.hex()} {vals}\n")

    @classmethod
    def load(cls, path) -> "QTable":
        table = cls()
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                key = bytes.fromhex(parts[0])
                table._table[key] = np.array([float(v) for v in parts[1:]])
        return table


@dataclass
class TabularLogRow:
    episode: int
    epsilon: float
    rolling_win_rate: float
    rolling_ep_len: float
    table_size: int


def train_tabular(
    env_config: EnvConfig,
    episodes: int,
    seed: int,
    alpha: float = 0.1,
    gamma: float = 0.99,
    schedule: EpsilonDecaySchedule = EpsilonDecaySchedule(),
    log_every: int = 1000,
) -> tuple[QTable, list[TabularLogRow]]:
    """Single-frog episode loop with per-episode epsilon decay."""
    if env_config.frogs != 1:
        raise ValueError("tabular training is single-frog only")
    env = QuantumFrogEnv(env_config)
    seq = np.random.SeedSequence(seed)
    action_rng = np.random.default_rng(seq.spawn(1)[0])
    episode_seeds = np.random.default_rng(seq.spawn(1)[0])
    table = QTable()
    log: list[TabularLogRow] = []
    recent_wins: list[int] = []
    recent_lens: list[int] = []
    for episode in range(episodes):
        eps = schedule.value(episode)
        obs = env.reset(int(episode_seeds.integers(0, 2**63 - 1)))
        key = canonical_key(obs)
        steps = 0
        won = 0
        while not env.done:
            action = table.select_action(key, eps, action_rng)
            res = env.step([action])
            next_key = canonical_key(res.observation)
            table.update(
                key,
                action,
                res.rewards[0],
                next_key,
                done=res.terminated,  # truncation still bootstraps
                alpha=alpha,
                gamma=gamma,
            )
            key = next_key
            steps += 1
            if res.terminated and res.rewards[0] > 0:
                won = 1
        recent_wins.append(won)
        recent_lens.append(steps)
        if len(recent_wins) > log_every:
            recent_wins.pop(0)
            recent_lens.pop(0)
        if (episode + 1) % log_every == 0:
            log.append(
                TabularLogRow(
                    episode=episode + 1,
                    epsilon=eps,
                    rolling_win_rate=float(np.mean(recent_wins)),
                    rolling_ep_len=float(np.mean(recent_lens)),
                    table_size=len(table),
                )
            )
    return table, log

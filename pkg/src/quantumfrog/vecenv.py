"""Synchronous vectorised runner: N independent env lanes with auto-reset."""

from __future__ import annotations

import numpy as np

from .env import EnvConfig, QuantumFrogEnv, StepResult


class VecEnv:
    """Steps N lanes in lockstep. Each lane reseeds itself on episode end
    from its own seed stream, so the whole rollout is a pure function of
    (config, base_seed)."""

    def __init__(self, config: EnvConfig, num_lanes: int, base_seed: int):
        self.config = config
        self.num_lanes = num_lanes
        self.envs = [QuantumFrogEnv(config) for _ in range(num_lanes)]
        seq = np.random.SeedSequence(base_seed)
        self._seed_rngs = [np.random.default_rng(s) for s in seq.spawn(num_lanes)]

    def _next_seed(self, lane: int) -> int:
        return int(self._seed_rngs[lane].integers(0, 2**63 - 1))

    def reset(self) -> np.ndarray:
        obs = [env.reset(self._next_seed(i)) for i, env in enumerate(self.envs)]
        return np.stack(obs)

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, list[StepResult]]:
        """`actions` has shape (num_lanes, frogs). Actions for non-ACTIVE
        frogs are ignored. Lanes that finish are auto-reset; the returned
        observation batch holds the *fresh* observation for those lanes while
        the StepResult keeps the terminal one."""
        results = []
        next_obs = []
        for lane, env in enumerate(self.envs):
            lane_actions = [
                actions[lane][i] for i in env.active_frogs()
            ]
            res = env.step(lane_actions)
            results.append(res)
            if env.done:
                next_obs.append(env.reset(self._next_seed(lane)))
            else:
                next_obs.append(res.observation)
        return np.stack(next_obs), results

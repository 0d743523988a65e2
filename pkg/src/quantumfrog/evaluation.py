"""Deterministic post-training evaluation across traffic densities 1-6."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .env import EnvConfig, FrogStatus, QuantumFrogEnv
from .mappo import MappoModel, actor_logits, frog_view
from .tabular import QTable
from .env import canonical_key

CSV_HEADER = ["cars", "joint_win", "win_A", "win_B", "avg_steps", "std_joint_win", "n_seeds"]


class EvalUsageError(ValueError):
    """Policy/environment arity mismatch or malformed report inputs."""


class TabularGreedyPolicy:
    frogs = 1

    def __init__(self, table: QTable):
        self.table = table

    def act(self, obs: np.ndarray) -> list[int]:
        return [self.table.greedy_action(canonical_key(obs))]


class DqnGreedyPolicy:
    frogs = 1

    def __init__(self, params: nn.PolicyWeights):
        self.params = params

    def act(self, obs: np.ndarray) -> list[int]:
        q, _ = nn.forward(self.params, obs.reshape(1, -1).astype(np.float32))
        return [int(q.argmax())]


class IdqnPolicy:
    frogs = 2

    def __init__(self, params_a: nn.PolicyWeights, params_b: nn.PolicyWeights):
        self.params = (params_a, params_b)

    def act(self, obs: np.ndarray) -> list[int]:
        flat = obs.reshape(1, -1).astype(np.float32)
        return [int(nn.forward(p, flat)[0].argmax()) for p in self.params]


class MappoPolicy:
    frogs = 2

    def __init__(self, actor_a: nn.PolicyWeights, actor_b: nn.PolicyWeights):
        self.actors = (actor_a, actor_b)

    @classmethod
    def from_model(cls, model: MappoModel) -> "MappoPolicy":
        return cls(model.actor_a, model.actor_b)

    def act(self, obs: np.ndarray) -> list[int]:
        flat = obs.reshape(1, -1).astype(np.float32)
        return [
            int(actor_logits(actor, frog_view(flat, k))[0].argmax())
            for k, actor in enumerate(self.actors)
        ]


class ConstantPolicy:
    """Degenerate baseline that always plays one action (oracle for tests)."""

    def __init__(self, action: int, frogs: int = 1):
        self.action = action
        self.frogs = frogs

    def act(self, obs: np.ndarray) -> list[int]:
        return [self.action] * self.frogs


@dataclass(frozen=True)
class EvalRow:
    cars: int
    joint_win: float
    win_a: float | None
    win_b: float | None
    avg_steps: float
    std_joint_win: float = 0.0
    n_seeds: int = 1


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]

    def row(self, cars: int) -> EvalRow:
        for r in self.rows:
            if r.cars == cars:
                return r
        raise KeyError(cars)

    @property
    def densities(self) -> tuple[int, ...]:
        return tuple(r.cars for r in self.rows)


def episode_seed(base_seed: int, cars: int, episode: int) -> int:
    """Eval seeds live in their own hashed space, disjoint from training."""
    digest = hashlib.blake2b(
        f"eval:{base_seed}:{cars}:{episode}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") % (2**63 - 1)


def evaluate(
    policy, env_config: EnvConfig, episodes: int = 200, base_seed: int = 0
) -> EvalRow:
    """Greedy rollouts at a single density. Individual wins count any frog
    that reached the goal row before the episode ended, regardless of how
    the episode ended."""
    if policy.frogs != env_config.frogs:
        raise EvalUsageError(
            f"policy controls {policy.frogs} frog(s) but env has {env_config.frogs}"
        )
    env = QuantumFrogEnv(env_config)
    joint_wins = 0
    indiv_wins = np.zeros(env_config.frogs, dtype=int)
    total_steps = 0
    for ep in range(episodes):
        obs = env.reset(episode_seed(base_seed, env_config.cars, ep))
        steps = 0
        while not env.done:
            actions = policy.act(obs)
            active = env.active_frogs()
            res = env.step([actions[i] for i in active])
            obs = res.observation
            steps += 1
        total_steps += steps
        statuses = [f.status for f in env.state.frogs]
        if all(s == FrogStatus.FINISHED for s in statuses):
            joint_wins += 1
        for i, s in enumerate(statuses):
            if s == FrogStatus.FINISHED:
                indiv_wins[i] += 1
    two_frog = env_config.frogs == 2
    return EvalRow(
        cars=env_config.cars,
        joint_win=joint_wins / episodes,
        win_a=indiv_wins[0] / episodes if two_frog else None,
        win_b=indiv_wins[1] / episodes if two_frog else None,
        avg_steps=total_steps / episodes,
    )


def evaluate_densities(
    policy,
    env_config: EnvConfig,
    densities: tuple[int, ...] = (1, 2, 3, 4, 5, 6),
    episodes: int = 200,
    base_seed: int = 0,
) -> EvalReport:
    rows = []
    for cars in densities:
        cfg = replace(env_config, cars=cars)
        rows.append(evaluate(policy, cfg, episodes=episodes, base_seed=base_seed))
    return EvalReport(rows=tuple(rows))


def aggregate_seeds(reports: list[EvalReport]) -> EvalReport:
    """Per-density mean across seed reports, with the sample standard
    deviation of the joint win rate."""
    if not reports:
        raise EvalUsageError("need at least one report")
    grids = {r.densities for r in reports}
    if len(grids) != 1:
        raise EvalUsageError(f"mismatched density grids: {grids}")
    rows = []
    for cars in reports[0].densities:
        cells = [r.row(cars) for r in reports]
        joints = np.array([c.joint_win for c in cells])
        std = float(np.std(joints, ddof=1)) if len(cells) > 1 else 0.0

        def _mean(vals):
            vals = [v for v in vals]
            return None if any(v is None for v in vals) else float(np.mean(vals))

        rows.append(
            EvalRow(
                cars=cars,
                joint_win=float(joints.mean()),
                win_a=_mean([c.win_a for c in cells]),
                win_b=_mean([c.win_b for c in cells]),
                avg_steps=float(np.mean([c.avg_steps for c in cells])),
                std_joint_win=std,
                n_seeds=len(cells),
            )
        )
    return EvalReport(rows=tuple(rows))


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_report(report: EvalReport, path, fmt: str = "csv") -> None:
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for r in report.rows:
                writer.writerow(
                    [r.cars, _fmt(r.joint_win), _fmt(r.win_a), _fmt(r.win_b),
                     _fmt(r.avg_steps), _fmt(r.std_joint_win), r.n_seeds]
                )
    elif fmt == "json":
        payload = [
            {"cars": r.cars, "joint_win": r.joint_win, "win_A": r.win_a,
             "win_B": r.win_b, "avg_steps": r.avg_steps,
             "std_joint_win": r.std_joint_win, "n_seeds": r.n_seeds}
            for r in report.rows
        ]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        raise EvalUsageError(f"unknown report format {fmt!r}")


def read_report(path, fmt: str = "csv") -> EvalReport:
    rows = []
    if fmt == "csv":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != CSV_HEADER:
                raise EvalUsageError(f"unexpected report header {header}")
            for rec in reader:
                rows.append(
                    EvalRow(
                        cars=int(rec[0]),
                        joint_win=float(rec[1]),
                        win_a=float(rec[2]) if rec[2] else None,
                        win_b=float(rec[3]) if rec[3] else None,
                        avg_steps=float(rec[4]),
                        std_joint_win=float(rec[5]),
                        n_seeds=int(rec[6]),
                    )
                )
    elif fmt == "json":
        with open(path) as fh:
            for rec in json.load(fh):
                rows.append(
                    EvalRow(
                        cars=int(rec["cars"]),
                        joint_win=rec["joint_win"],
                        win_a=rec["win_A"],
                        win_b=rec["win_B"],
                        avg_steps=rec["avg_steps"],
                        std_joint_win=rec["std_joint_win"],
                        n_seeds=rec["n_seeds"],
                    )
                )
    else:
        raise EvalUsageError(f"unknown report format {fmt!r}")
    return EvalReport(rows=tuple(rows))

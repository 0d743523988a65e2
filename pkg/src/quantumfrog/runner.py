"""Multi-seed training orchestration: dispatch to the right trainer, write
checkpoints, training logs, and a run manifest."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, replace
from pathlib import Path

from . import dqn as dqn_mod
from . import mappo as mappo_mod
from . import nn
from .config import StageConfig, config_hash
from .evaluation import (
    DqnGreedyPolicy,
    IdqnPolicy,
    MappoPolicy,
    TabularGreedyPolicy,
    aggregate_seeds,
    evaluate_densities,
    write_report,
)
from .tabular import EpsilonDecaySchedule, QTable, train_tabular

MANIFEST_NAME = "manifest.json"


def read_manifest(run_dir: Path) -> dict | None:
    path = Path(run_dir) / MANIFEST_NAME
    if not path.exists():
        return None
    with open(path) as fh:
        return json.load(fh)


def write_manifest(run_dir: Path, manifest: dict) -> None:
    with open(Path(run_dir) / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dqn_hyper(config: StageConfig) -> dqn_mod.DqnHyper:
    if config.algorithm == "idqn":
        base = dqn_mod.idqn_default_hyper(config.train_budget)
        return replace(base, **config.hyper_overrides)
    return dqn_mod.DqnHyper(total_steps=config.train_budget, **config.hyper_overrides)


def _ppo_hyper(config: StageConfig) -> mappo_mod.PpoHyper:
    return mappo_mod.PpoHyper(total_steps=config.train_budget, **config.hyper_overrides)


def train_one_seed(config: StageConfig, seed: int, run_dir: Path) -> dict[str, str]:
    """Train a single seed; returns relative checkpoint paths by role."""
    run_dir = Path(run_dir)
    env_config = config.env_config()
    if config.algorithm == "tabular":
        schedule = EpsilonDecaySchedule(
            **{k: v for k, v in config.hyper_overrides.items()
               if k in ("eps0", "eps_min", "decay")}
        )
        alpha = config.hyper_overrides.get("alpha", 0.1)
        gamma = config.hyper_overrides.get("gamma", 0.99)
        table, log = train_tabular(
            env_config, episodes=config.train_budget, seed=seed,
            alpha=alpha, gamma=gamma, schedule=schedule,
        )
        ckpt = f"qtable_seed{seed}.txt"
        table.save(run_dir / ckpt)
        with open(run_dir / f"log_seed{seed}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "epsilon", "rolling_win_rate",
                             "rolling_ep_len", "table_size"])
            for row in log:
                writer.writerow([row.episode, f"{row.epsilon:.6f}",
                                 f"{row.rolling_win_rate:.4f}",
                                 f"{row.rolling_ep_len:.2f}", row.table_size])
        return {"qtable": ckpt}
    if config.algorithm == "dqn":
        agent, log = dqn_mod.train_dqn(env_config, seed, _dqn_hyper(config))
        ckpt = f"q_seed{seed}.qfw"
        nn.save_weights(agent.online, run_dir / ckpt)
        dqn_mod.write_log_csv(run_dir / f"log_seed{seed}.csv", log)
        return {"q": ckpt}
    if config.algorithm == "idqn":
        (agent_a, agent_b), log = dqn_mod.train_idqn(env_config, seed, _dqn_hyper(config))
        paths = {"q_A": f"q_A_seed{seed}.qfw", "q_B": f"q_B_seed{seed}.qfw"}
        nn.save_weights(agent_a.online, run_dir / paths["q_A"])
        nn.save_weights(agent_b.online, run_dir / paths["q_B"])
        dqn_mod.write_log_csv(run_dir / f"log_seed{seed}.csv", log)
        return paths
    if config.algorithm == "mappo":
        model, log = mappo_mod.train_mappo(env_config, seed, _ppo_hyper(config))
        paths = {
            "actor_A": f"actor_A_seed{seed}.qfw",
            "actor_B": f"actor_B_seed{seed}.qfw",
            "critic": f"critic_seed{seed}.qfw",
        }
        nn.save_weights(model.actor_a, run_dir / paths["actor_A"])
        nn.save_weights(model.actor_b, run_dir / paths["actor_B"])
        nn.save_weights(model.critic, run_dir / paths["critic"])
        mappo_mod.write_log_csv(run_dir / f"log_seed{seed}.csv", log)
        return paths
    raise ValueError(f"unknown algorithm {config.algorithm!r}")


def train_run(config: StageConfig, run_dir: Path, progress=print) -> dict:
    """Run all seeds of a stage and write the manifest."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%S")
    checkpoints = {}
    for seed in config.seeds:
        progress(f"[stage {config.stage}/{config.algorithm}] training seed {seed} ...")
        checkpoints[str(seed)] = train_one_seed(config, seed, run_dir)
    manifest = {
        "config": config.to_dict(),
        "config_hash": config_hash(config),
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "checkpoints": checkpoints,
        "reports": {},
    }
    write_manifest(run_dir, manifest)
    return manifest


def load_policy(config: StageConfig, run_dir: Path, seed: int):
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    if manifest is None:
        raise FileNotFoundError(f"{run_dir}: no manifest; train first")
    paths = manifest["checkpoints"].get(str(seed))
    if paths is None:
        raise FileNotFoundError(f"{run_dir}: no checkpoint for seed {seed}")
    if config.algorithm == "tabular":
        return TabularGreedyPolicy(QTable.load(run_dir / paths["qtable"]))
    if config.algorithm == "dqn":
        return DqnGreedyPolicy(nn.load_weights(run_dir / paths["q"]))
    if config.algorithm == "idqn":
        return IdqnPolicy(
            nn.load_weights(run_dir / paths["q_A"]),
            nn.load_weights(run_dir / paths["q_B"]),
        )
    if config.algorithm == "mappo":
        return MappoPolicy(
            nn.load_weights(run_dir / paths["actor_A"]),
            nn.load_weights(run_dir / paths["actor_B"]),
        )
    raise ValueError(f"unknown algorithm {config.algorithm!r}")


def evaluate_run(
    run_dir: Path,
    densities: tuple[int, ...] = (1, 2, 3, 4, 5, 6),
    episodes: int = 200,
    eval_seed: int = 0,
    progress=print,
) -> dict:
    """Evaluate every seed of a trained run across densities; writes one
    per-seed report plus an across-seed aggregate, and records them in the
    manifest."""
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    if manifest is None:
        raise FileNotFoundError(f"{run_dir}: no manifest; train first")
    config = StageConfig.from_dict(manifest["config"])
    reports = []
    report_paths = {}
    for seed in config.seeds:
        policy = load_policy(config, run_dir, seed)
        progress(f"[stage {config.stage}/{config.algorithm}] evaluating seed {seed} ...")
        report = evaluate_densities(
            policy, config.env_config(), densities=densities,
            episodes=episodes, base_seed=eval_seed,
        )
        name = f"stage{config.stage}_{config.algorithm}_{seed}.csv"
        write_report(report, run_dir / name)
        report_paths[str(seed)] = name
        reports.append(report)
    aggregate = aggregate_seeds(reports)
    agg_name = f"stage{config.stage}_{config.algorithm}_aggregate.csv"
    write_report(aggregate, run_dir / agg_name)
    report_paths["aggregate"] = agg_name
    manifest["reports"] = report_paths
    write_manifest(run_dir, manifest)
    return manifest

"""Declarative experiment configuration: stage defaults, file/flag loading,
and content hashing for reproducible run manifests."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import yaml

from .env import ConfigError, EnvConfig

ALGORITHMS = ("tabular", "dqn", "idqn", "mappo")

# Stage grid: (algorithm, frogs, cars, speeds, train budget, default seed count)
STAGE_DEFAULTS = {
    1: ("tabular", 1, 1, (1,), 20_000, 1),
    2: ("tabular", 1, 2, (1,), 50_000, 1),
    3: ("dqn", 1, 4, (1, 2), 300_000, 4),
    4: ("idqn", 2, 2, (1,), 200_000, 4),
    5: ("mappo", 2, 4, (1, 2), 1_000_000, 4),
}


@dataclass(frozen=True)
class StageConfig:
    stage: int
    algorithm: str
    frogs: int
    cars: int
    speeds: tuple[int, ...]
    train_budget: int  # episodes for tabular, environment steps otherwise
    seeds: tuple[int, ...]
    hyper_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGE_DEFAULTS:
            raise ConfigError(f"unknown stage {self.stage}; choose 1..5")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    def env_config(self) -> EnvConfig:
        return EnvConfig(frogs=self.frogs, cars=self.cars, speeds=self.speeds)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["speeds"] = list(self.speeds)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StageConfig":
        return cls(
            stage=int(d["stage"]),
            algorithm=str(d["algorithm"]),
            frogs=int(d["frogs"]),
            cars=int(d["cars"]),
            speeds=tuple(int(s) for s in d["speeds"]),
            train_budget=int(d["train_budget"]),
            seeds=tuple(int(s) for s in d["seeds"]),
            hyper_overrides=dict(d.get("hyper_overrides", {})),
        )


def stage_config(
    stage: int,
    *,
    base_seed: int = 1000,
    num_seeds: int | None = None,
    **overrides,
) -> StageConfig:
    """Stage defaults with optional field overrides. Per-seed run seeds are
    base_seed + index, one purpose-split stream family per run."""
    if stage not in STAGE_DEFAULTS:
        raise ConfigError(f"unknown stage {stage}; choose 1..5")
    algo, frogs, cars, speeds, budget, seeds = STAGE_DEFAULTS[stage]
    if num_seeds is not None:
        if num_seeds < 1:
            raise ConfigError("num_seeds must be >= 1")
        seeds = num_seeds
    fields = {
        "stage": stage,
        "algorithm": algo,
        "frogs": frogs,
        "cars": cars,
        "speeds": speeds,
        "train_budget": budget,
        "seeds": tuple(base_seed + i for i in range(seeds)),
        "hyper_overrides": {},
    }
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in fields:
            raise ConfigError(f"unknown config field {key!r}")
        fields[key] = value
    return StageConfig(**fields)


def load_config_file(path) -> dict:
    """YAML stage-config file; keys mirror StageConfig fields."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


def config_hash(config: StageConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def serialize_config(config: StageConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)


def parse_config(text: str) -> StageConfig:
    return StageConfig.from_dict(yaml.safe_load(text))

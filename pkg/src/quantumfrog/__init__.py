"""Quantized-time cooperative grid-crossing game, training curriculum, and
evaluation tooling."""

from .env import (
    Action,
    Car,
    ConfigError,
    EnvConfig,
    FrogState,
    FrogStatus,
    GridState,
    Outcome,
    QuantumFrogEnv,
    StepResult,
    UsageError,
    canonical_key,
    observe,
    render,
)

__all__ = [
    "Action",
    "Car",
    "ConfigError",
    "EnvConfig",
    "FrogState",
    "FrogStatus",
    "GridState",
    "Outcome",
    "QuantumFrogEnv",
    "StepResult",
    "UsageError",
    "canonical_key",
    "observe",
    "render",
]

__version__ = "0.1.0"

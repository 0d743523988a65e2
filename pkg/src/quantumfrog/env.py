"""Quantized-time 8x8 grid-crossing game engine.

One or two frogs start on row 7 and must reach row 0 while horizontally
moving cars patrol rows 1..6.  The world advances exactly one tick per
(joint) step call and is frozen in between.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Sequence

import numpy as np

GRID_SIZE = 8
GOAL_ROW = 0
START_ROW = 7
TRAFFIC_ROWS = range(1, 7)
OBS_SHAPE = (3, GRID_SIZE, GRID_SIZE)
OBS_FLAT = 3 * GRID_SIZE * GRID_SIZE  # 192

REWARD_GOAL = 100
REWARD_COLLISION = -100
REWARD_PROGRESS = 1
REWARD_STEP = -1


class ConfigError(ValueError):
    """Invalid environment configuration."""


class UsageError(RuntimeError):
    """Environment API misuse (step after terminal, wrong action arity)."""


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4


# (drow, dcol) per action code; row 0 is the top (goal) row.
_MOVES = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
    Action.STAY: (0, 0),
}


class FrogStatus(IntEnum):
    ACTIVE = 0
    FINISHED = 1
    DEAD = 2


class Outcome(IntEnum):
    NONE = 0
    SUCCESS = 1
    COLLISION = 2
    TIMEOUT = 3


@dataclass(frozen=True)
class EnvConfig:
    frogs: int = 1
    cars: int = 1
    speeds: tuple[int, ...] = (1,)
    max_steps: int = 200
    start_cols: tuple[int, ...] = (2, 5)

    def __post_init__(self):
        if self.frogs not in (1, 2):
            raise ConfigError(f"frogs must be 1 or 2, got {self.frogs}")
        if not 1 <= self.cars <= 6:
            raise ConfigError(f"cars must be in 1..6, got {self.cars}")
        speeds = tuple(sorted(set(int(s) for s in self.speeds)))
        if not speeds:
            raise ConfigError("speed set must be non-empty")
        if not set(speeds) <= {1, 2, 3}:
            raise ConfigError(f"speeds must be a subset of {{1,2,3}}, got {speeds}")
        object.__setattr__(self, "speeds", speeds)
        if self.max_steps < 1:
            raise ConfigError("max_steps must be positive")
        if len(self.start_cols) < self.frogs:
            raise ConfigError("need one start column per frog")


@dataclass
class Car:
    row: int
    col: int
    velocity: int  # signed cells per tick; + is column-increasing


@dataclass
class FrogState:
    row: int
    col: int
    status: FrogStatus = FrogStatus.ACTIVE


@dataclass
class GridState:
    frogs: list[FrogState]
    cars: list[Car]
    tick: int = 0


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    rewards: tuple[int, ...]
    terminated: bool
    truncated: bool
    outcome: Outcome


def observe(state: GridState) -> np.ndarray:
    """Encode state as a 3x8x8 int8 array (frogs / car presence / velocity)."""
    obs = np.zeros(OBS_SHAPE, dtype=np.int8)
    for i, frog in enumerate(state.frogs):
        if frog.status != FrogStatus.DEAD:
            # Overlapping frogs add (1 + 2 = 3): the encoding stays injective
            # and symmetric in the two frog identities.
            obs[0, frog.row, frog.col] += i + 1
    for car in state.cars:
        obs[1, car.row, car.col] = 1
        obs[2, car.row, car.col] = car.velocity
    return obs


def canonical_key(obs: np.ndarray) -> bytes:
    """Injective 192-byte key (channel-major, row-major, one signed byte/cell)."""
    return np.ascontiguousarray(obs, dtype=np.int8).tobytes()


def swept_cols(col: int, velocity: int) -> list[int]:
    """Columns a car passes through this tick, destination included."""
    step = 1 if velocity > 0 else -1
    return [(col + step * k) % GRID_SIZE for k in range(1, abs(velocity) + 1)]


def render(state: GridState) -> str:
    """Text grid: A/B frogs, >/< cars by direction, '.' empty."""
    grid = [["."] * GRID_SIZE for _ in range(GRID_SIZE)]
    for car in state.cars:
        grid[car.row][car.col] = ">" if car.velocity > 0 else "<"
    for i, frog in enumerate(state.frogs):
        if frog.status != FrogStatus.DEAD:
            grid[frog.row][frog.col] = "AB"[i]
    return "\n".join("".join(row) for row in grid)


class QuantumFrogEnv:
    """Single game instance. Not thread-safe; use one instance per lane."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.state: GridState | None = None
        self._done = False
        self._rng = None

    def reset(self, seed: int) -> np.ndarray:
        cfg = self.config
        rng = np.random.default_rng(seed)
        frogs = [
            FrogState(row=START_ROW, col=int(cfg.start_cols[i]))
            for i in range(cfg.frogs)
        ]
        rows = rng.choice(np.arange(1, 7), size=cfg.cars, replace=False)
        cars = []
        for row in rows:
            col = int(rng.integers(0, GRID_SIZE))
            speed = int(rng.choice(np.asarray(cfg.speeds)))
            direction = 1 if rng.integers(0, 2) == 1 else -1
            cars.append(Car(row=int(row), col=col, velocity=speed * direction))
        self.state = GridState(frogs=frogs, cars=cars, tick=0)
        self._done = False
        self._rng = rng
        return observe(self.state)

    @property
    def done(self) -> bool:
        return self._done

    def active_frogs(self) -> list[int]:
        assert self.state is not None
        return [
            i for i, f in enumerate(self.state.frogs) if f.status == FrogStatus.ACTIVE
        ]

    def step(self, actions: Sequence[int]) -> StepResult:
        """Advance one tick. `actions` carries one action per ACTIVE frog,
        in frog-index order."""
        if self.state is None:
            raise UsageError("step() before reset()")
        if self._done:
            raise UsageError("step() after episode end; call reset()")
        state = self.state
        active = self.active_frogs()
        if len(actions) != len(active):
            raise UsageError(
                f"expected {len(active)} action(s), got {len(actions)}"
            )

        prev_rows = {i: state.frogs[i].row for i in active}
        # Phase 1: frog moves, boundary-clamped.
        for idx, act in zip(active, actions):
            frog = state.frogs[idx]
            drow, dcol = _MOVES[Action(int(act))]
            row = min(max(frog.row + drow, 0), GRID_SIZE - 1)
            col = min(max(frog.col + dcol, 0), GRID_SIZE - 1)
            frog.row, frog.col = row, col

        # Phase 2: frog stepped into a car cell (cars not yet moved).
        occupied = {(c.row, c.col) for c in state.cars}
        for idx in active:
            frog = state.frogs[idx]
            if (frog.row, frog.col) in occupied:
                frog.status = FrogStatus.DEAD

        # Phase 3: cars advance with wraparound, sweeping intermediate cells.
        sweeps: list[tuple[int, list[int]]] = []
        for car in state.cars:
            cols = swept_cols(car.col, car.velocity)
            sweeps.append((car.row, cols))
            car.col = cols[-1]

        # Phase 4: car ran over a frog (swept cells included).
        for idx in active:
            frog = state.frogs[idx]
            if frog.status != FrogStatus.ACTIVE:
                continue
            for row, cols in sweeps:
                if frog.row == row and frog.col in cols:
                    frog.status = FrogStatus.DEAD
                    break

        # Rewards; collision dominates goal dominates progress dominates step cost.
        rewards = []
        for i, frog in enumerate(state.frogs):
            if i not in prev_rows:  # finished before this tick
                rewards.append(0)
            elif frog.status == FrogStatus.DEAD:
                rewards.append(REWARD_COLLISION)
            elif frog.row == GOAL_ROW:
                frog.status = FrogStatus.FINISHED
                rewards.append(REWARD_GOAL)
            elif frog.row == prev_rows[i] - 1:
                rewards.append(REWARD_PROGRESS)
            else:
                rewards.append(REWARD_STEP)

        state.tick += 1
        statuses = [f.status for f in state.frogs]
        if any(s == FrogStatus.DEAD for s in statuses):
            terminated, outcome = True, Outcome.COLLISION
        elif all(s == FrogStatus.FINISHED for s in statuses):
            terminated, outcome = True, Outcome.SUCCESS
        else:
            terminated, outcome = False, Outcome.NONE
        truncated = not terminated and state.tick >= self.config.max_steps
        if truncated:
            outcome = Outcome.TIMEOUT
        self._done = terminated or truncated
        return StepResult(
            observation=observe(state),
            rewards=tuple(rewards),
            terminated=terminated,
            truncated=truncated,
            outcome=outcome,
        )

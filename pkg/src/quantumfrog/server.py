"""HTTP + WebSocket play service.

Sessions wrap one env instance each. In two-human modes a tick resolves only
once every human-controlled ACTIVE frog has committed an action (the board is
frozen while players deliberate); agent actions are computed from the same
pre-tick state when the barrier releases.
"""

from __future__ import annotations

import asyncio
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from . import nn
from .env import (
    Action,
    EnvConfig,
    FrogStatus,
    Outcome,
    QuantumFrogEnv,
)

SCHEMA_VERSION = 1
DEFAULT_SESSION_TIMEOUT = 30 * 60  # seconds

MODES = ("hotseat", "human-vs-agent", "agent-demo")


class CreateSessionRequest(BaseModel):
    mode: str | None = None
    frogs: int | None = None
    cars: int | None = None
    speeds: list[int] | None = None
    seed: int | None = None


class ResetRequest(BaseModel):
    seed: int | None = None


class ActionRequest(BaseModel):
    frog: int
    action: int


def _policy_action(params: nn.PolicyWeights, obs: np.ndarray) -> int:
    q, _ = nn.forward(params, obs.reshape(1, -1).astype(np.float32))
    return int(q.argmax())


@dataclass
class Session:
    sid: str
    mode: str
    env: QuantumFrogEnv
    policies: dict[int, nn.PolicyWeights]  # frog index -> network
    seed_rng: np.random.Generator
    pending: dict[int, int] = field(default_factory=dict)
    last_rewards: list[int] = field(default_factory=list)
    cumulative: list[float] = field(default_factory=list)
    outcome: str = "NONE"
    episode_log: list[dict] = field(default_factory=list)
    archived_logs: list[list[dict]] = field(default_factory=list)
    watchers: list[WebSocket] = field(default_factory=list)
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    last_active: float = field(default_factory=time.monotonic)

    def human_frogs(self) -> list[int]:
        n = self.env.config.frogs
        if self.mode == "agent-demo":
            return []
        if self.mode == "human-vs-agent":
            return [i for i in range(n) if i not in self.policies]
        return list(range(n))

    def required_humans(self) -> list[int]:
        active = set(self.env.active_frogs())
        return [i for i in self.human_frogs() if i in active]

    def start_episode(self, seed: int | None) -> None:
        if seed is None:
            seed = int(self.seed_rng.integers(0, 2**63 - 1))
        if self.episode_log:
            self.archived_logs.append(self.episode_log)
        self.env.reset(seed)
        n = self.env.config.frogs
        self.pending = {}
        self.last_rewards = [0] * n
        self.cumulative = [0.0] * n
        self.outcome = "NONE"
        self.episode_log = []

    def resolve_tick(self) -> None:
        obs = self.env.state and None  # sanity: state exists after reset
        current_obs = None
        active = self.env.active_frogs()
        # Agent actions come from the same frozen pre-tick state.
        from .env import observe

        current_obs = observe(self.env.state)
        actions = []
        for i in active:
            if i in self.pending:
                actions.append(self.pending[i])
            elif i in self.policies:
                actions.append(_policy_action(self.policies[i], current_obs))
            else:
                raise RuntimeError("barrier released without all human actions")
        res = self.env.step(actions)
        self.pending = {}
        self.last_rewards = list(res.rewards)
        for i, r in enumerate(res.rewards):
            self.cumulative[i] += r
        self.outcome = res.outcome.name
        self.episode_log.append(
            {"tick": self.env.state.tick, "actions": [int(a) for a in actions],
             "rewards": [int(r) for r in res.rewards], "outcome": res.outcome.name}
        )

    def state_message(self) -> dict:
        state = self.env.state
        grid = [[{"kind": "empty"} for _ in range(8)] for _ in range(8)]
        for car in state.cars:
            grid[car.row][car.col] = {"kind": "car", "velocity": car.velocity}
        for i, frog in enumerate(state.frogs):
            if frog.status != FrogStatus.DEAD:
                grid[frog.row][frog.col] = {"kind": f"frog{'AB'[i]}"}
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": self.sid,
            "mode": self.mode,
            "tick": state.tick,
            "grid": grid,
            "frogs": [
                {
                    "row": f.row,
                    "col": f.col,
                    "status": f.status.name,
                    "last_reward": self.last_rewards[i],
                    "cumulative_reward": self.cumulative[i],
                    "human": i in self.human_frogs(),
                    "pending": i in self.pending,
                }
                for i, f in enumerate(state.frogs)
            ],
            "outcome": self.outcome,
            "done": self.env.done,
        }


def build_app(
    default_mode: str = "hotseat",
    default_env: EnvConfig | None = None,
    checkpoints: list[str] | None = None,
    session_timeout: float = DEFAULT_SESSION_TIMEOUT,
) -> FastAPI:
    app = FastAPI(title="quantumfrog play service")
    sessions: dict[str, Session] = {}
    loaded = [nn.load_weights(p) for p in (checkpoints or [])]

    def _assign_policies(mode: str, frogs: int) -> dict[int, nn.PolicyWeights]:
        if mode == "hotseat":
            return {}
        if not loaded:
            raise HTTPException(400, f"mode {mode!r} requires a policy checkpoint")
        if mode == "agent-demo":
            return {i: loaded[min(i, len(loaded) - 1)] for i in range(frogs)}
        # human-vs-agent: checkpoint role tag picks the agent frog; default B.
        params = loaded[0]
        agent_frog = 0 if params.role.endswith("_A") or params.role.endswith("A") else min(1, frogs - 1)
        return {agent_frog: params}

    def _expire() -> None:
        now = time.monotonic()
        for sid in [s for s, sess in sessions.items()
                    if now - sess.last_active > session_timeout]:
            del sessions[sid]

    def _get(sid: str) -> Session:
        _expire()
        sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(404, f"unknown session {sid}")
        sess.last_active = time.monotonic()
        return sess

    async def _broadcast(sess: Session) -> None:
        message = sess.state_message()
        stale = []
        for ws in sess.watchers:
            try:
                await ws.send_json(message)
            except Exception:
                stale.append(ws)
        for ws in stale:
            sess.watchers.remove(ws)

    @app.post("/sessions")
    async def create_session(req: CreateSessionRequest):
        _expire()
        mode = req.mode or default_mode
        if mode not in MODES:
            raise HTTPException(400, f"mode must be one of {MODES}")
        base = default_env or EnvConfig(frogs=2, cars=2, speeds=(1,))
        try:
            cfg = EnvConfig(
                frogs=req.frogs if req.frogs is not None else base.frogs,
                cars=req.cars if req.cars is not None else base.cars,
                speeds=tuple(req.speeds) if req.speeds is not None else base.speeds,
            )
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        sid = uuid.uuid4().hex[:12]
        sess = Session(
            sid=sid,
            mode=mode,
            env=QuantumFrogEnv(cfg),
            policies=_assign_policies(mode, cfg.frogs),
            seed_rng=np.random.default_rng(),
        )
        sess.start_episode(req.seed)
        sessions[sid] = sess
        return {"session_id": sid, "state": sess.state_message()}

    @app.get("/sessions/{sid}")
    async def get_session(sid: str):
        return _get(sid).state_message()

    @app.post("/sessions/{sid}/reset")
    async def reset_session(sid: str, req: ResetRequest):
        sess = _get(sid)
        async with sess.lock:
            sess.start_episode(req.seed)
            await _broadcast(sess)
            return sess.state_message()

    @app.post("/sessions/{sid}/actions")
    async def submit_action(sid: str, req: ActionRequest):
        sess = _get(sid)
        async with sess.lock:
            if sess.env.done:
                raise HTTPException(409, "episode over; reset the session")
            n = sess.env.config.frogs
            if not 0 <= req.frog < n:
                raise HTTPException(400, f"frog must be in 0..{n - 1}")
            if not 0 <= req.action < len(Action):
                raise HTTPException(400, "action must be in 0..4")
            if req.frog not in sess.human_frogs():
                raise HTTPException(409, f"frog {req.frog} is agent-controlled")
            if req.frog not in sess.required_humans():
                raise HTTPException(409, f"frog {req.frog} is not active")
            if req.frog in sess.pending:
                raise HTTPException(409, "action already pending for this frog; wait for the tick")
            sess.pending[req.frog] = req.action
            resolved = False
            if all(i in sess.pending for i in sess.required_humans()):
                sess.resolve_tick()
                resolved = True
                await _broadcast(sess)
            return {"resolved": resolved, "state": sess.state_message()}

    @app.post("/sessions/{sid}/advance")
    async def advance(sid: str):
        sess = _get(sid)
        async with sess.lock:
            if sess.mode != "agent-demo":
                raise HTTPException(409, "advance is only valid in agent-demo mode")
            if sess.env.done:
                raise HTTPException(409, "episode over; reset the session")
            sess.resolve_tick()
            await _broadcast(sess)
            return sess.state_message()

    @app.get("/sessions/{sid}/hint")
    async def hint(sid: str, frog: int = 0):
        sess = _get(sid)
        if sess.env.done:
            raise HTTPException(409, "episode over; no hint available")
        params = sess.policies.get(frog) or (loaded[0] if loaded else None)
        if params is None:
            raise HTTPException(404, "no policy loaded on the server")
        from .env import observe

        action = _policy_action(params, observe(sess.env.state))
        return {"frog": frog, "action": action, "action_name": Action(action).name}

    @app.websocket("/sessions/{sid}/ws")
    async def live(ws: WebSocket, sid: str):
        sess = sessions.get(sid)
        if sess is None:
            await ws.close(code=4004)
            return
        await ws.accept()
        sess.watchers.append(ws)
        await ws.send_json(sess.state_message())
        try:
            while True:
                await ws.receive_text()  # keepalive pings; content ignored
        except WebSocketDisconnect:
            if ws in sess.watchers:
                sess.watchers.remove(ws)

    app.state.sessions = sessions
    return app

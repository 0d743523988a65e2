"""Command-line entry point: train / eval / compare / play / render-episode.

Exit codes: 0 ok, 2 usage error, 3 configuration error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import (
    StageConfig,
    config_hash,
    load_config_file,
    stage_config,
)
from .env import Action, ConfigError, EnvConfig, QuantumFrogEnv, render
from .runner import evaluate_run, read_manifest, train_run

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4

PLAY_MODES = ("hotseat", "human-vs-agent", "agent-demo")


def default_out_dir() -> Path:
    return Path(os.environ.get("QF_OUT_DIR", "./runs"))


def _parse_speeds(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantumfrog",
        description="Quantized-time grid game: training curriculum, evaluation, and play server.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one stage across seeds")
    p_train.add_argument("--stage", type=int, required=True, help="stage id 1..5")
    p_train.add_argument("--config", type=Path, help="YAML config file (flags override)")
    p_train.add_argument("--cars", type=int)
    p_train.add_argument("--frogs", type=int)
    p_train.add_argument("--speeds", type=_parse_speeds, help="e.g. '1,2'")
    p_train.add_argument("--episodes", type=int, dest="train_budget",
                         help="training budget (episodes for tabular, env steps otherwise)")
    p_train.add_argument("--steps", type=int, dest="train_budget",
                         help="alias for --episodes")
    p_train.add_argument("--seeds", type=int, help="number of seeds")
    p_train.add_argument("--base-seed", type=int, default=1000)
    p_train.add_argument("--out", type=Path, help="run directory")
    p_train.add_argument("--force", action="store_true",
                         help="retrain even if an identical config hash exists")

    p_eval = sub.add_parser("eval", help="evaluate a trained run across densities")
    p_eval.add_argument("run_dir", type=Path)
    p_eval.add_argument("--densities", type=_parse_speeds, default=(1, 2, 3, 4, 5, 6))
    p_eval.add_argument("--episodes", type=int, default=200)
    p_eval.add_argument("--eval-seed", type=int, default=0)

    p_cmp = sub.add_parser("compare", help="per-density win-rate delta of run A minus run B")
    p_cmp.add_argument("run_dir_a", type=Path)
    p_cmp.add_argument("run_dir_b", type=Path)

    p_play = sub.add_parser("play", help="start the interactive play server")
    p_play.add_argument("--mode", choices=PLAY_MODES, default="hotseat")
    p_play.add_argument("--ckpt", type=Path, action="append", default=[],
                        help="policy checkpoint (repeat for frog A then B)")
    p_play.add_argument("--frogs", type=int, default=2)
    p_play.add_argument("--cars", type=int, default=2)
    p_play.add_argument("--speeds", type=_parse_speeds, default=(1,))
    p_play.add_argument("--port", type=int, default=7777)
    p_play.add_argument("--host", default="127.0.0.1")

    p_render = sub.add_parser("render-episode", help="dump a text replay of one episode")
    p_render.add_argument("--run-dir", type=Path, help="trained run to drive the frogs")
    p_render.add_argument("--policy-seed", type=int, help="which training seed's checkpoint")
    p_render.add_argument("--cars", type=int, default=2)
    p_render.add_argument("--frogs", type=int, default=1)
    p_render.add_argument("--speeds", type=_parse_speeds, default=(1,))
    p_render.add_argument("--seed", type=int, default=0, help="episode seed")
    p_render.add_argument("--max-ticks", type=int, default=50)
    return parser


def _train_config(args) -> StageConfig:
    file_values = {}
    if args.config is not None:
        file_values = load_config_file(args.config)
    # Precedence: flags > file > stage defaults.
    overrides = dict(file_values)
    for key in ("cars", "frogs", "speeds", "train_budget"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    num_seeds = args.seeds if args.seeds is not None else overrides.pop("seeds", None)
    if isinstance(num_seeds, list):
        num_seeds = len(num_seeds)
    overrides.pop("stage", None)
    overrides.pop("algorithm", None)
    hyper = overrides.pop("hyper_overrides", {})
    cfg = stage_config(
        args.stage, base_seed=args.base_seed, num_seeds=num_seeds, **overrides
    )
    if hyper:
        cfg = replace(cfg, hyper_overrides=dict(hyper))
    return cfg


def cmd_train(args) -> int:
    config = _train_config(args)
    run_dir = args.out or default_out_dir() / f"stage{config.stage}_{config.algorithm}"
    existing = read_manifest(run_dir)
    if existing is not None and existing.get("config_hash") == config_hash(config):
        if not args.force:
            print(f"run with identical config hash {config_hash(config)} already "
                  f"exists at {run_dir}; use --force to retrain")
            return EXIT_OK
        print(f"--force: retraining over existing run at {run_dir}")
    manifest = train_run(config, run_dir)
    print(f"trained {len(config.seeds)} seed(s); manifest hash {manifest['config_hash']}")
    print(f"run directory: {run_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = evaluate_run(
        args.run_dir, densities=tuple(args.densities),
        episodes=args.episodes, eval_seed=args.eval_seed,
    )
    print(f"reports written: {', '.join(manifest['reports'].values())}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .evaluation import read_report

    rows = []
    reports = []
    for run_dir in (args.run_dir_a, args.run_dir_b):
        manifest = read_manifest(run_dir)
        if manifest is None or "aggregate" not in manifest.get("reports", {}):
            raise FileNotFoundError(f"{run_dir}: run not evaluated yet")
        reports.append(read_report(Path(run_dir) / manifest["reports"]["aggregate"]))
    a, b = reports
    if a.densities != b.densities:
        raise ValueError(f"density grids differ: {a.densities} vs {b.densities}")
    print("cars  delta_joint_win_pp")
    for cars in a.densities:
        delta = (a.row(cars).joint_win - b.row(cars).joint_win) * 100.0
        rows.append((cars, delta))
        print(f"{cars:>4}  {delta:+.1f}")
    out = Path(args.run_dir_a) / "compare.csv"
    with open(out, "w") as fh:
        fh.write("cars,delta_joint_win_pp\n")
        for cars, delta in rows:
            fh.write(f"{cars},{delta:+.1f}\n")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_play(args) -> int:
    import uvicorn

    from .server import build_app

    if args.mode in ("human-vs-agent", "agent-demo") and not args.ckpt:
        raise ConfigError(f"mode {args.mode!r} requires --ckpt")
    env_config = EnvConfig(frogs=args.frogs, cars=args.cars, speeds=args.speeds)
    app = build_app(
        default_mode=args.mode,
        default_env=env_config,
        checkpoints=[str(p) for p in args.ckpt],
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def cmd_render_episode(args) -> int:
    env_config = EnvConfig(frogs=args.frogs, cars=args.cars, speeds=args.speeds)
    policy = None
    if args.run_dir is not None:
        from .runner import load_policy

        manifest = read_manifest(args.run_dir)
        if manifest is None:
            raise FileNotFoundError(f"{args.run_dir}: no manifest")
        config = StageConfig.from_dict(manifest["config"])
        seed = args.policy_seed if args.policy_seed is not None else config.seeds[0]
        policy = load_policy(config, args.run_dir, seed)
        env_config = replace(config.env_config(), cars=args.cars)
    env = QuantumFrogEnv(env_config)
    obs = env.reset(args.seed)
    print(f"tick 0")
    print(render(env.state))
    tick = 0
    while not env.done and tick < args.max_ticks:
        if policy is None:
            actions = [Action.UP] * len(env.active_frogs())
        else:
            acts = policy.act(obs)
            actions = [acts[i] for i in env.active_frogs()]
        res = env.step(actions)
        obs = res.observation
        tick += 1
        print(f"\ntick {tick}  rewards {res.rewards}  outcome {res.outcome.name}")
        print(render(env.state))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "compare": cmd_compare,
        "play": cmd_play,
        "render-episode": cmd_render_episode,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

import json
from pathlib import Path

import pytest

from quantumfrog.cli import EXIT_CONFIG, EXIT_OK, main
from quantumfrog.config import (
    StageConfig,
    config_hash,
    parse_config,
    serialize_config,
    stage_config,
)
from quantumfrog.env import ConfigError
from quantumfrog.runner import read_manifest


class TestStageConfig:
    def test_stage_defaults_match_experiment_grid(self):
        s3 = stage_config(3)
        assert (s3.algorithm, s3.frogs, s3.cars, s3.speeds) == ("dqn", 1, 4, (1, 2))
        assert s3.train_budget == 300_000
        assert len(s3.seeds) == 4
        s1 = stage_config(1)
        assert (s1.algorithm, s1.frogs, s1.cars, s1.speeds) == ("tabular", 1, 1, (1,))
        assert s1.train_budget == 20_000 and len(s1.seeds) == 1
        s4 = stage_config(4)
        assert (s4.algorithm, s4.frogs, s4.cars) == ("idqn", 2, 2)
        s5 = stage_config(5)
        assert (s5.algorithm, s5.frogs, s5.cars, s5.speeds) == ("mappo", 2, 4, (1, 2))
        assert s5.train_budget == 1_000_000

    def test_round_trip(self):
        cfg = stage_config(5, num_seeds=2, cars=3)
        assert parse_config(serialize_config(cfg)) == cfg

    def test_hash_stable_and_sensitive(self):
        a = stage_config(3)
        b = stage_config(3)
        c = stage_config(3, cars=2)
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(c)

    def test_unknown_stage_rejected(self):
        with pytest.raises(ConfigError):
            stage_config(9)

    def test_seed_derivation_base_plus_index(self):
        cfg = stage_config(3, base_seed=50, num_seeds=3)
        assert cfg.seeds == (50, 51, 52)


def run(args):
    return main([str(a) for a in args])


@pytest.fixture
def stage1_run(tmp_path):
    out = tmp_path / "run1"
    code = run(["train", "--stage", 1, "--episodes", 300, "--seeds", 1, "--out", out])
    assert code == EXIT_OK
    return out


class TestTrainCommand:
    def test_writes_manifest_and_checkpoint(self, stage1_run):
        manifest = read_manifest(stage1_run)
        assert manifest is not None
        assert manifest["config"]["algorithm"] == "tabular"
        ckpt = manifest["checkpoints"]["1000"]["qtable"]
        assert (stage1_run / ckpt).exists()

    def test_rerun_with_same_hash_detected(self, stage1_run, capsys):
        before = read_manifest(stage1_run)
        code = run(["train", "--stage", 1, "--episodes", 300, "--seeds", 1,
                    "--out", stage1_run])
        assert code == EXIT_OK
        assert "identical config hash" in capsys.readouterr().out
        assert read_manifest(stage1_run) == before

    def test_invalid_cars_rejected(self, tmp_path):
        code = run(["train", "--stage", 3, "--cars", 9, "--out", tmp_path / "x"])
        assert code == EXIT_CONFIG

    def test_config_file_with_flag_precedence(self, tmp_path):
        cfg_file = tmp_path / "cfg.yaml"
        cfg_file.write_text("cars: 2\ntrain_budget: 100\n")
        out = tmp_path / "run"
        code = run(["train", "--stage", 1, "--config", cfg_file,
                    "--episodes", 150, "--out", out])
        assert code == EXIT_OK
        manifest = read_manifest(out)
        assert manifest["config"]["cars"] == 2  # from file
        assert manifest["config"]["train_budget"] == 150  # flag wins


class TestEvalCommand:
    def test_eval_writes_reports(self, stage1_run):
        code = run(["eval", stage1_run, "--episodes", 10, "--densities", "1,2"])
        assert code == EXIT_OK
        manifest = read_manifest(stage1_run)
        assert "aggregate" in manifest["reports"]
        per_seed = stage1_run / manifest["reports"]["1000"]
        assert per_seed.name == "stage1_tabular_1000.csv"
        assert per_seed.exists()
        lines = per_seed.read_text().splitlines()
        assert len(lines) == 3  # header + 2 densities

    def test_eval_missing_run_is_io_error(self, tmp_path):
        from quantumfrog.cli import EXIT_IO

        assert run(["eval", tmp_path / "nope"]) == EXIT_IO


class TestCompareCommand:
    def test_identical_runs_zero_delta(self, stage1_run, capsys):
        run(["eval", stage1_run, "--episodes", 10, "--densities", "1,2"])
        code = run(["compare", stage1_run, stage1_run])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "+0.0" in out
        content = (stage1_run / "compare.csv").read_text()
        assert "1,+0.0" in content and "2,+0.0" in content

    def test_antisymmetry(self, tmp_path, stage1_run, capsys):
        other = tmp_path / "run_b"
        run(["train", "--stage", 1, "--episodes", 200, "--seeds", 1, "--out", other])
        run(["eval", stage1_run, "--episodes", 20, "--densities", "1"])
        run(["eval", other, "--episodes", 20, "--densities", "1"])
        run(["compare", stage1_run, other])
        fwd = (stage1_run / "compare.csv").read_text().splitlines()[1]
        run(["compare", other, stage1_run])
        rev = (other / "compare.csv").read_text().splitlines()[1]
        assert abs(float(fwd.split(",")[1]) + float(rev.split(",")[1])) < 1e-9


class TestRenderEpisode:
    def test_dumps_replay(self, capsys):
        code = run(["render-episode", "--cars", 1, "--seed", 3, "--max-ticks", 8])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "tick 0" in out
        assert "A" in out

    def test_with_trained_policy(self, stage1_run, capsys):
        code = run(["render-episode", "--run-dir", stage1_run, "--cars", 1,
                    "--seed", 1, "--max-ticks", 20])
        assert code == EXIT_OK
        assert "outcome" in capsys.readouterr().out


class TestUsageErrors:
    def test_unknown_command_exit_two(self):
        assert run(["frobnicate"]) == 2

    def test_play_bad_mode_exit_two(self):
        assert run(["play", "--mode", "nonsense"]) == 2

    def test_play_agent_mode_requires_checkpoint(self):
        assert run(["play", "--mode", "agent-demo"]) == EXIT_CONFIG


class TestReproducibility:
    def test_same_config_byte_identical_artifacts(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run(["train", "--stage", 1, "--episodes", 250, "--seeds", 1,
                        "--out", out]) == EXIT_OK
            assert run(["eval", out, "--episodes", 10, "--densities", "1"]) == EXIT_OK
            outs.append(out)
        m0, m1 = (read_manifest(o) for o in outs)
        assert m0["config_hash"] == m1["config_hash"]
        ck0 = outs[0] / m0["checkpoints"]["1000"]["qtable"]
        ck1 = outs[1] / m1["checkpoints"]["1000"]["qtable"]
        assert ck0.read_bytes() == ck1.read_bytes()
        r0 = outs[0] / m0["reports"]["aggregate"]
        r1 = outs[1] / m1["reports"]["aggregate"]
        assert r0.read_bytes() == r1.read_bytes()

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from morphforge.cli import main
from morphforge.scene import load_scene


@pytest.fixture()
def runner():
    return CliRunner()


def run_cli(runner, args):
    return runner.invoke(main, args, catch_exceptions=False)


class TestSceneGen:
    def test_gen_writes_scene(self, runner, tmp_path):
        out = tmp_path / "scene.json"
        r = run_cli(runner, ["scene", "gen", "--goals", "3", "--obstacles", "2", "--seed", "5", "--out", str(out)])
        assert r.exit_code == 0
        sc = load_scene(out.read_bytes())
        assert len(sc.goals) == 3 and len(sc.obstacles) == 2

    def test_workspace(self, runner, tmp_path):
        out = tmp_path / "ws.json"
        r = run_cli(runner, ["scene", "workspace", "--n", "10", "--seed", "2", "--out", str(out)])
        assert r.exit_code == 0
        assert len(load_scene(out.read_bytes()).goals) == 10


class TestDesignAndEvaluate:
    def test_design_then_evaluate_matches(self, runner, tmp_path):
        scene = tmp_path / "scene.json"
        run_cli(runner, ["scene", "gen", "--goals", "2", "--obstacles", "1", "--max-dist", "0.6", "--seed", "3", "--out", str(scene)])
        out = tmp_path / "run"
        r = run_cli(
            runner,
            ["design", str(scene), "--mode", "modular", "--dof", "3", "--seed", "3",
             "--candidates", "2", "--adam-steps", "30", "--out", str(out)],
        )
        assert r.exit_code == 0
        doc = json.loads((out / "design_result.json").read_bytes())
        assert len(doc["candidates"]) == 2
        assert doc["config"]["seed"] == 3
        ev = run_cli(runner, ["evaluate", str(scene), str(out / "design_result.json"), "--index", "0"])
        assert ev.exit_code == 0
        result = json.loads(ev.stdout)
        assert result["loss"]["total"] == pytest.approx(doc["candidates"][0]["loss"]["total"], abs=1e-12)

    def test_validation_error_exit_code(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        out = tmp_path / "r"
        result = runner.invoke(
            main, ["design", str(bad), "--mode", "modular", "--dof", "3", "--out", str(out)]
        )
        assert result.exit_code == 2

    def test_config_file_with_flag_override(self, runner, tmp_path):
        scene = tmp_path / "scene.json"
        run_cli(runner, ["scene", "gen", "--goals", "2", "--obstacles", "0", "--max-dist", "0.6", "--seed", "4", "--out", str(scene)])
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"mode": "modular", "dof": 4, "seed": 9, "solver": {"n_candidates": 3, "adam_steps": 10}}))
        out = tmp_path / "run"
        r = run_cli(runner, ["design", str(scene), "--config", str(cfg), "--dof", "3", "--out", str(out)])
        assert r.exit_code == 0
        doc = json.loads((out / "design_result.json").read_bytes())
        assert doc["config"]["dof"] == 3  # flag wins
        assert doc["config"]["solver"]["n_candidates"] == 3  # file value kept
        assert doc["config"]["seed"] == 9

    def test_toml_config(self, runner, tmp_path):
        scene = tmp_path / "scene.json"
        run_cli(runner, ["scene", "gen", "--goals", "1", "--obstacles", "0", "--max-dist", "0.5", "--seed", "4", "--out", str(scene)])
        cfg = tmp_path / "run.toml"
        cfg.write_text('mode = "modular"\ndof = 3\nseed = 11\n[solver]\nn_candidates = 1\nadam_steps = 10\n')
        out = tmp_path / "run"
        r = run_cli(runner, ["design", str(scene), "--config", str(cfg), "--out", str(out)])
        assert r.exit_code == 0
        doc = json.loads((out / "design_result.json").read_bytes())
        assert doc["config"]["seed"] == 11 and doc["config"]["dof"] == 3


class TestBaselineCommands:
    def test_brute_force_cmd(self, runner, tmp_path):
        scene = tmp_path / "scene.json"
        run_cli(runner, ["scene", "gen", "--goals", "2", "--obstacles", "1", "--max-dist", "0.6", "--seed", "5", "--out", str(scene)])
        out = tmp_path / "bf.json"
        r = run_cli(runner, ["brute-force", str(scene), "--dof", "2", "--out", str(out)])
        assert r.exit_code == 0
        doc = json.loads(out.read_bytes())
        assert len(doc["entries"]) == 25
        scores = [e["score"] for e in doc["entries"]]
        assert max(scores) == 1.0 and min(scores) == 0.0

    def test_ga_cmd(self, runner, tmp_path):
        scene = tmp_path / "scene.json"
        run_cli(runner, ["scene", "gen", "--goals", "2", "--obstacles", "1", "--max-dist", "0.6", "--seed", "6", "--out", str(scene)])
        out = tmp_path / "ga.json"
        r = run_cli(
            runner,
            ["ga", str(scene), "--dof", "2", "--population", "4", "--generations", "3", "--seed", "1", "--out", str(out)],
        )
        assert r.exit_code == 0
        doc = json.loads(out.read_bytes())
        assert len(doc["history"]["best"]) == 3

    def test_bench_cmd(self, runner, tmp_path):
        out = tmp_path / "bench"
        r = run_cli(
            runner,
            ["bench", "--tasks", "1", "--goals", "2", "--obstacles", "1", "--max-dist", "0.6",
             "--dof", "2", "--methods", "bf,random", "--seed", "4", "--out", str(out)],
        )
        assert r.exit_code == 0
        assert (out / "report.json").exists()
        assert (out / "summary.csv").exists()
        task_dirs = list(out.glob("task_*"))
        assert len(task_dirs) == 1 and (task_dirs[0] / "scores.csv").exists()


class TestDeterminism:
    def test_design_byte_identical(self, runner, tmp_path):
        scene = tmp_path / "scene.json"
        run_cli(runner, ["scene", "gen", "--goals", "2", "--obstacles", "1", "--max-dist", "0.6", "--seed", "7", "--out", str(scene)])
        args = ["design", str(scene), "--mode", "modular", "--dof", "3", "--seed", "7",
                "--candidates", "2", "--adam-steps", "25"]
        run_cli(runner, args + ["--out", str(tmp_path / "a")])
        run_cli(runner, args + ["--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "design_result.json").read_bytes()
        b = (tmp_path / "b" / "design_result.json").read_bytes()
        assert a == b

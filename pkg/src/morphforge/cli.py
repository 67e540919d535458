"""Batch entry points: scene generation, single-task design, baselines,
benchmark reproduction, and the HTTP server.

All randomness hangs off --seed; commands echo their resolved configuration
to stderr and embed it in output files, so any run can be reproduced from
its artifacts. Exit codes: 0 success, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .errors import MorphForgeError, ParseError, ValidationError
from .kinematics import DesignMode, DesignParams, ModuleCatalog, default_catalog
from .objective import LossWeights, benchmark_loss, pose_errors, solved_check, total_loss
from .render import build_render_model
from .scene import (
    Scene,
    ToleranceMode,
    WorkspaceBox,
    load_scene,
    sample_cluttered_task,
    sample_workspace_goals,
    save_scene,
)
from .search import GAConfig, brute_force, genetic_search, random_search, run_benchmark
from .solver import SolverConfig, design_task

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    raw = p.read_bytes()
    if p.suffix.lower() == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(raw.decode())
    return json.loads(raw)


def _resolve(config_path, overrides: dict) -> dict:
    """File config with CLI flags overriding non-None values."""
    doc = _load_config_file(config_path)
    out = {
        "mode": doc.get("mode", "modular"),
        "dof": doc.get("dof", 6),
        "seed": doc.get("seed", 0),
        "threads": doc.get("threads"),
        "catalog": doc.get("catalog"),
        "solver": doc.get("solver", {}),
        "weights": doc.get("weights", {}),
        "ga": doc.get("ga", {}),
    }
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("candidates", "ik_starts", "adam_steps"):
            solver_key = {
                "candidates": "n_candidates",
                "ik_starts": "ik_starts_per_goal",
                "adam_steps": "adam_steps",
            }[key]
            out["solver"][solver_key] = value
        else:
            out[key] = value
    out["solver"]["rng_seed"] = out["seed"]
    return out


def _apply_threads(threads):
    if threads:
        import torch

        torch.set_num_threads(int(threads))


def _echo_config(resolved: dict):
    click.echo("resolved config: " + json.dumps(resolved, sort_keys=True), err=True)


def _catalog_from(resolved) -> ModuleCatalog:
    if resolved.get("catalog"):
        return ModuleCatalog.load(resolved["catalog"])
    return default_catalog()


def _write_json(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(json.dumps(doc, indent=2, sort_keys=True).encode())


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _run(func):
    try:
        func()
    except (ValidationError, ParseError, click.ClickException) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except _Fail as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.code)
    except MorphForgeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    except Exception as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)


@click.group()
def main():
    """Task-tailored manipulator co-design."""


@main.group()
def scene():
    """Scene generation utilities."""


@scene.command("gen")
@click.option("--goals", default=8, show_default=True)
@click.option("--obstacles", default=8, show_default=True)
@click.option("--max-dist", default=1.0, show_default=True)
@click.option("--radius-min", default=0.05, show_default=True)
@click.option("--radius-max", default=0.15, show_default=True)
@click.option("--tolerance", default="full_pose", type=click.Choice([t.value for t in ToleranceMode]))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def scene_gen(goals, obstacles, max_dist, radius_min, radius_max, tolerance, seed, out):
    """Sample a cluttered task and write it as a scene file."""

    def go():
        sc = sample_cluttered_task(
            goals,
            obstacles,
            max_dist,
            radius_range=(radius_min, radius_max),
            rng=np.random.default_rng(seed),
            tolerance=ToleranceMode(tolerance),
            seed=seed,
        )
        Path(out).write_bytes(save_scene(sc))
        click.echo(f"wrote {out} ({goals} goals, {obstacles} obstacles, seed {seed})", err=True)

    _run(go)


@scene.command("workspace")
@click.option("--center", nargs=3, type=float, default=(0.5, 0.0, 0.4), show_default=True)
@click.option("--extents", nargs=3, type=float, default=(0.8, 1.0, 0.8), show_default=True)
@click.option("--n", default=100, show_default=True)
@click.option("--tolerance", default="full_pose", type=click.Choice([t.value for t in ToleranceMode]))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def scene_workspace(center, extents, n, tolerance, seed, out):
    """Sample goals uniformly inside a workspace box."""

    def go():
        ws = WorkspaceBox(np.asarray(center), np.asarray(extents))
        goals = sample_workspace_goals(ws, n, ToleranceMode(tolerance), np.random.default_rng(seed))
        sc = Scene(goals, rng_seed=seed)
        Path(out).write_bytes(save_scene(sc))
        click.echo(f"wrote {out} ({n} goals in box, seed {seed})", err=True)

    _run(go)


_shared = [
    click.option("--mode", type=click.Choice([m.value for m in DesignMode]), default=None),
    click.option("--dof", type=int, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--candidates", type=int, default=None),
    click.option("--ik-starts", type=int, default=None),
    click.option("--adam-steps", type=int, default=None),
    click.option("--catalog", type=click.Path(exists=True), default=None),
    click.option("--threads", type=int, default=None),
    click.option("--config", "config_path", type=click.Path(exists=True), default=None),
]


def shared_options(func):
    for opt in reversed(_shared):
        func = opt(func)
    return func


@main.command()
@click.argument("scene_file", type=click.Path(exists=True))
@shared_options
@click.option("--out", required=True, type=click.Path())
def design(scene_file, out, config_path, threads, **overrides):
    """Synthesize ranked candidate designs for a scene."""

    def go():
        resolved = _resolve(config_path, {**overrides, "threads": threads})
        _apply_threads(resolved["threads"])
        _echo_config(resolved)
        sc = load_scene(Path(scene_file).read_bytes())
        cfg = SolverConfig.from_dict(resolved["solver"])
        weights = LossWeights.from_dict(resolved["weights"])
        catalog = _catalog_from(resolved)
        mode = DesignMode(resolved["mode"])
        candidates = design_task(sc, mode, int(resolved["dof"]), cfg, weights, catalog)
        result = {
            "config": {
                "mode": mode.value,
                "dof": int(resolved["dof"]),
                "seed": int(resolved["seed"]),
                "solver": cfg.to_dict(),
                "weights": weights.to_dict(),
            },
            "candidates": [c.to_dict() for c in candidates],
            "render": build_render_model(sc, candidates, catalog),
        }
        _write_json(Path(out) / "design_result.json", result)
        click.echo(
            f"wrote {out}/design_result.json: best loss "
            f"{candidates[0].bench:.6f}, solved {candidates[0].solved_goals}/{len(sc.goals)} goals",
            err=True,
        )

    _run(go)


@main.command()
@click.argument("scene_file", type=click.Path(exists=True))
@click.argument("candidate_file", type=click.Path(exists=True))
@click.option("--index", default=0, show_default=True, help="candidate index when given a design result")
@shared_options
@click.option("--out", type=click.Path(), default=None)
def evaluate(scene_file, candidate_file, index, out, config_path, threads, **overrides):
    """Score a (params, joint angles) pair against a scene."""

    def go():
        resolved = _resolve(config_path, {**overrides, "threads": threads})
        _apply_threads(resolved["threads"])
        _echo_config(resolved)
        sc = load_scene(Path(scene_file).read_bytes())
        weights = LossWeights.from_dict(resolved["weights"])
        catalog = _catalog_from(resolved)
        doc = json.loads(Path(candidate_file).read_bytes())
        if "candidates" in doc:
            doc = doc["candidates"][index]
        params = DesignParams.from_dict(doc["params"])
        q = np.asarray(doc["ik"]["q"] if "ik" in doc else doc["q"], dtype=float)
        bd = total_loss(sc, params, q, weights, catalog)
        from .kinematics import build_robot, forward_kinematics

        robot = build_robot(params, catalog)
        per_goal = []
        for g, goal in enumerate(sc.goals):
            _, ee = forward_kinematics(robot, q[:, g], base=sc.base_pose)
            pos_err, rot_err = pose_errors(goal, ee)
            per_goal.append(
                {
                    "goal_id": goal.id,
                    "pos_error_m": pos_err,
                    "rot_error_rad": rot_err,
                    "solved": bool(solved_check(goal, ee)),
                }
            )
        result = {
            "loss": bd.to_dict(),
            "benchmark_loss": benchmark_loss(bd, weights),
            "per_goal": per_goal,
        }
        if out:
            _write_json(Path(out), result)
        click.echo(json.dumps(result, indent=2, sort_keys=True))

    _run(go)


@main.command("brute-force")
@click.argument("scene_file", type=click.Path(exists=True))
@shared_options
@click.option("--cap", default=20000, show_default=True)
@click.option("--out", required=True, type=click.Path())
def brute_force_cmd(scene_file, out, cap, config_path, threads, **overrides):
    """Evaluate every modular assembly in the design space."""

    def go():
        resolved = _resolve(config_path, {**overrides, "threads": threads})
        _apply_threads(resolved["threads"])
        _echo_config(resolved)
        sc = load_scene(Path(scene_file).read_bytes())
        cfg = SolverConfig.from_dict(resolved["solver"])
        weights = LossWeights.from_dict(resolved["weights"])
        catalog = _catalog_from(resolved)
        res = brute_force(sc, catalog, int(resolved["dof"]), cfg, weights, cap=cap)
        result = {
            "loss_min": res.loss_min,
            "loss_max": res.loss_max,
            "entries": [
                {
                    "slots": list(e.slots),
                    "benchmark_loss": e.bench,
                    "score": float(s),
                    "solved_goals": e.solved_goals,
                }
                for e, s in zip(res.entries, res.scores)
            ],
        }
        _write_json(Path(out), result)
        click.echo(f"wrote {out}: {len(res.entries)} assemblies, best loss {res.loss_min:.6f}", err=True)

    _run(go)


@main.command()
@click.argument("scene_file", type=click.Path(exists=True))
@shared_options
@click.option("--population", type=int, default=None)
@click.option("--generations", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
def ga(scene_file, out, population, generations, config_path, threads, **overrides):
    """Genetic search over modular assemblies."""

    def go():
        resolved = _resolve(config_path, {**overrides, "threads": threads})
        _apply_threads(resolved["threads"])
        _echo_config(resolved)
        sc = load_scene(Path(scene_file).read_bytes())
        cfg = SolverConfig.from_dict(resolved["solver"])
        weights = LossWeights.from_dict(resolved["weights"])
        catalog = _catalog_from(resolved)
        ga_doc = dict(resolved["ga"])
        if population:
            ga_doc["population"] = population
        if generations:
            ga_doc["generations"] = generations
        ga_doc["rng_seed"] = resolved["seed"]
        ga_cfg = GAConfig.from_dict(ga_doc)
        best, history = genetic_search(sc, catalog, int(resolved["dof"]), ga_cfg, cfg, weights)
        result = {
            "best": best.to_dict(),
            "history": {"best": history.best, "mean": history.mean},
            "ga": ga_cfg.to_dict(),
        }
        _write_json(Path(out), result)
        click.echo(f"wrote {out}: best loss {best.bench:.6f}", err=True)

    _run(go)


@main.command()
@click.option("--tasks", default=10, show_default=True)
@click.option("--goals", default=4, show_default=True)
@click.option("--obstacles", default=4, show_default=True)
@click.option("--max-dist", default=0.8, show_default=True)
@click.option("--methods", default="bf,ga,random,pipeline", show_default=True)
@shared_options
@click.option("--population", type=int, default=None)
@click.option("--generations", type=int, default=None)
@click.option("--include-hardware/--no-include-hardware", default=False, show_default=True)
@click.option("--out", required=True, type=click.Path())
def bench(tasks, goals, obstacles, max_dist, methods, out, population, generations,
          include_hardware, config_path, threads, **overrides):
    """Reproduce the cluttered-environment benchmark protocol."""

    def go():
        resolved = _resolve(config_path, {**overrides, "threads": threads})
        _apply_threads(resolved["threads"])
        _echo_config(resolved)
        cfg = SolverConfig.from_dict(resolved["solver"])
        weights = LossWeights.from_dict(
            {**resolved["weights"], "include_hardware_in_benchmark": include_hardware}
        )
        catalog = _catalog_from(resolved)
        ga_doc = dict(resolved["ga"])
        if population:
            ga_doc["population"] = population
        if generations:
            ga_doc["generations"] = generations
        ga_doc.setdefault("rng_seed", resolved["seed"])
        ga_cfg = GAConfig.from_dict(ga_doc)
        base_seed = int(resolved["seed"])
        task_seeds = [base_seed * 1000 + i for i in range(tasks)]
        report = run_benchmark(
            task_seeds,
            [m.strip() for m in methods.split(",")],
            dof=int(resolved["dof"]),
            n_goals=goals,
            n_obstacles=obstacles,
            max_dist=max_dist,
            catalog=catalog,
            solver_cfg=cfg,
            ga_cfg=ga_cfg,
            w=weights,
            out_dir=out,
        )
        click.echo(f"wrote report to {out}: {json.dumps(report.aggregate, sort_keys=True)}", err=True)

    _run(go)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--data-dir", default=None)
@click.option("--workers", type=int, default=None)
def serve(host, port, data_dir, workers):
    """Run the design-studio HTTP service."""

    def go():
        from .service import serve as run_server

        run_server(host=host, port=port, data_dir=data_dir, workers=workers)

    _run(go)


if __name__ == "__main__":
    main()

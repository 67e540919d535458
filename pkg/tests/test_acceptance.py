"""Acceptance suite: one test per primary criterion.

Each test pins its tolerance, prints a PASS/FAIL line with the measured
values, and asserts both the criterion and its runtime budget.
"""

import json
import math
import time

import numpy as np
import pytest
import torch
from scipy.stats import mannwhitneyu, pearsonr

from morphforge.experiments import (
    ik_recovery_experiment,
    tolerance_comparison_experiment,
    workspace_scaling_experiment,
)
from morphforge.geometry import DT
from morphforge.grad import finite_difference_check
from morphforge.kinematics import (
    DesignMode,
    DesignParams,
    build_robot,
    default_catalog,
    fk_frames_t,
    forward_kinematics,
    geometric_jacobian,
)
from morphforge.objective import LossWeights, collision_pair_loss
from morphforge.scene import sample_cluttered_task
from morphforge.search import (
    AssemblyEvaluator,
    GAConfig,
    brute_force,
    genetic_search,
    random_search,
)
from morphforge.solver import SolverConfig, design_task

from oracles import fk_oracle


def report(name: str, ok: bool, detail: str):
    print(f"{'PASS' if ok else 'FAIL'} — {name}: {detail}")


class TestAcceptance:
    def test_collision_loss_algebra(self):
        t0 = time.time()
        t = 0.12
        at_zero = collision_pair_loss(0.0, t)
        at_t = collision_pair_loss(t, t)
        ok_values = abs(at_zero - 1.0) <= 1e-12 and abs(at_t) <= 1e-12
        rng = np.random.default_rng(0)
        sds = np.sort(rng.uniform(-0.5, 0.5, 10_000))
        vals = np.array([collision_pair_loss(sd, t) for sd in sds])
        ok_monotone = bool(np.all(np.diff(vals) <= 1e-15))
        elapsed = time.time() - t0
        ok = ok_values and ok_monotone and elapsed < 1.0
        report(
            "collision-loss algebra",
            ok,
            f"loss(0,t)={at_zero:.15f}, loss(t,t)={at_t:.1e}, monotone={ok_monotone}, {elapsed:.2f}s",
        )
        assert ok_values and ok_monotone
        assert elapsed < 1.0

    def test_gradient_fidelity(self):
        t0 = time.time()
        w = LossWeights()
        worst = {}
        for mode in (DesignMode.FREE, DesignMode.ECONOMIC):
            rng = np.random.default_rng(100 if mode is DesignMode.FREE else 200)
            errs = []
            for _ in range(100):
                n = int(rng.integers(3, 6))
                if mode is DesignMode.FREE:
                    d = rng.uniform(0.05, 0.35, n)
                    a = rng.uniform(0.05, 0.35, n) * rng.choice([-1, 1], n)
                    al = rng.uniform(-2.5, 2.5, n)
                else:
                    d = np.where(rng.uniform(size=n) < 0.25, 0.0, rng.uniform(0.15, 0.35, n))
                    a = rng.uniform(0.15, 0.35, n) * rng.choice([-1, 1], n)
                    a[rng.uniform(size=n) < 0.2] = 0.0
                    al = np.asarray([0.0, math.pi / 2, -math.pi / 2])[rng.integers(0, 3, n)]
                params = DesignParams(mode, rows=np.column_stack([d, a, al]))
                m = int(rng.integers(1, 4))
                scene = sample_cluttered_task(m, int(rng.integers(0, 4)), 1.0, rng=rng)
                q = rng.uniform(-math.pi, math.pi, (n, m))
                errs.append(finite_difference_check(scene, params, q, w, step=1e-6))
            worst[mode.value] = max(errs)
        elapsed = time.time() - t0
        ok = all(v < 1e-4 for v in worst.values()) and elapsed < 300
        report(
            "gradient fidelity",
            ok,
            f"max rel err free={worst['free']:.2e}, economic={worst['economic']:.2e}, {elapsed:.0f}s",
        )
        assert worst["free"] < 1e-4 and worst["economic"] < 1e-4
        assert elapsed < 300

    def test_fk_jacobian_oracles(self):
        t0 = time.time()
        rng = np.random.default_rng(7)
        n, count = 6, 100_000
        rows = np.stack(
            [
                np.column_stack(
                    [
                        rng.uniform(0.0, 0.4, n),
                        rng.uniform(-0.4, 0.4, n),
                        rng.uniform(-math.pi, math.pi, n),
                    ]
                )
                for _ in range(count)
            ]
        )
        q = rng.uniform(-math.pi, math.pi, (count, n))
        prox = torch.eye(4, dtype=DT).expand(n, 4, 4)
        with torch.no_grad():
            _, _, frames = fk_frames_t(
                torch.as_tensor(q, dtype=DT), prox, rows=torch.as_tensor(rows, dtype=DT)
            )
        ee = frames[:, -1].numpy()
        worst_fk = 0.0
        for i in range(count):
            want = fk_oracle(rows[i], q[i])
            worst_fk = max(worst_fk, float(np.abs(ee[i] - want).max()))
        ok_fk = worst_fk < 1e-12

        worst_jac = 0.0
        step = 1e-6
        for _ in range(200):
            nj = int(rng.integers(2, 7))
            params = DesignParams(
                DesignMode.FREE,
                rows=np.column_stack(
                    [
                        rng.uniform(0.0, 0.4, nj),
                        rng.uniform(-0.4, 0.4, nj),
                        rng.uniform(-math.pi, math.pi, nj),
                    ]
                ),
            )
            robot = build_robot(params)
            qq = rng.uniform(-math.pi, math.pi, nj)
            jac = geometric_jacobian(robot, qq)
            for i in range(nj):
                qp, qm = qq.copy(), qq.copy()
                qp[i] += step
                qm[i] -= step
                fd = (
                    forward_kinematics(robot, qp)[1].position
                    - forward_kinematics(robot, qm)[1].position
                ) / (2 * step)
                denom = max(np.abs(fd).max(), np.abs(jac[:3, i]).max(), 1e-3)
                worst_jac = max(worst_jac, float(np.abs(fd - jac[:3, i]).max() / denom))
        ok_jac = worst_jac < 1e-5
        elapsed = time.time() - t0
        ok = ok_fk and ok_jac and elapsed < 120
        report(
            "FK/Jacobian oracles",
            ok,
            f"FK max err={worst_fk:.2e} over {count} samples, Jacobian FD rel err={worst_jac:.2e}, {elapsed:.0f}s",
        )
        assert ok_fk and ok_jac
        assert elapsed < 120

    def test_ik_recovery(self):
        t0 = time.time()
        total_solved = total = 0
        per_mode = {}
        for mode, count in (
            (DesignMode.FREE, 334),
            (DesignMode.ECONOMIC, 333),
            (DesignMode.MODULAR, 333),
        ):
            res = ik_recovery_experiment(count, 6, mode, seed=2026)
            per_mode[mode.value] = res.solved_fraction
            total_solved += res.solved
            total += res.n_tasks
        frac = total_solved / total
        elapsed = time.time() - t0
        ok = frac >= 0.95 and elapsed < 900
        report(
            "IK recovery",
            ok,
            f"{total_solved}/{total} = {frac:.2%} solved at 1mm/1deg "
            f"(free {per_mode['free']:.1%}, economic {per_mode['economic']:.1%}, "
            f"modular {per_mode['modular']:.1%}), {elapsed:.0f}s",
        )
        assert frac >= 0.95
        assert elapsed < 900

    def test_desk_scale_benchmark(self):
        t0 = time.time()
        cat = default_catalog()
        solver_cfg = SolverConfig(rng_seed=0)
        w = LossWeights(include_hardware_in_benchmark=False)
        pipe_wins = ga_wins = 0
        for i in range(10):
            task_seed = 3000 + i
            scene = sample_cluttered_task(
                4, 4, 0.8, rng=np.random.default_rng(task_seed), seed=task_seed
            )
            ev = AssemblyEvaluator(scene, cat, solver_cfg, w)
            bf = brute_force(scene, cat, 4, solver_cfg, w, evaluator=ev)
            threshold = float(np.percentile(bf.scores, 90))

            pipe_seed = int(
                np.random.SeedSequence([solver_cfg.rng_seed, task_seed, 1]).generate_state(1)[0]
            )
            cands = design_task(
                scene, DesignMode.MODULAR, 4, SolverConfig(rng_seed=pipe_seed), w, cat
            )
            pipe_wins += bf.score_of(cands[0].bench) >= threshold

            ga_seed = int(
                np.random.SeedSequence([solver_cfg.rng_seed, task_seed, 2]).generate_state(1)[0]
            )
            ga_best, _ = genetic_search(
                scene, cat, 4,
                GAConfig(population=32, generations=30, rng_seed=ga_seed),
                solver_cfg, w, evaluator=ev,
            )
            rs_seed = int(
                np.random.SeedSequence([solver_cfg.rng_seed, task_seed, 3]).generate_state(1)[0]
            )
            rs_best = random_search(
                scene, cat, 4, 32 * 30, solver_cfg, w, rng_seed=rs_seed, evaluator=ev
            )
            ga_wins += ga_best.bench <= rs_best.bench + 1e-12
        elapsed = time.time() - t0
        ok = pipe_wins >= 7 and ga_wins >= 7 and elapsed < 3600
        report(
            "desk-scale brute-force benchmark",
            ok,
            f"pipeline in bf top-10% on {pipe_wins}/10 tasks; "
            f"GA at-least-matches random search on {ga_wins}/10 tasks, {elapsed:.0f}s",
        )
        assert pipe_wins >= 7
        assert ga_wins >= 7
        assert elapsed < 3600

    def test_workspace_scaling_correlation(self):
        t0 = time.time()
        res = workspace_scaling_experiment(
            n_scales=10,
            designs_per_scale=10,
            goals_per_design=8,
            config=SolverConfig(n_candidates=2, ik_starts_per_goal=2, adam_steps=120, rng_seed=5),
            seed=5,
        )
        elapsed = time.time() - t0
        ok = res.pearson_r > 0 and res.p_value < 0.05
        report(
            "workspace-scaling correlation",
            ok,
            f"pearson r={res.pearson_r:.3f}, p={res.p_value:.2e} over {len(res.scales)} designs, {elapsed:.0f}s",
        )
        assert res.pearson_r > 0
        assert res.p_value < 0.05

    def test_goal_tolerance_adaptation(self):
        t0 = time.time()
        res = tolerance_comparison_experiment(
            n_goals=100, config=SolverConfig(n_candidates=4, rng_seed=17), seed=17
        )
        test = mannwhitneyu(
            res.rot_errors_position_mode, res.rot_errors_full_mode, alternative="greater"
        )
        elapsed = time.time() - t0
        ok = res.frac_within_1mm >= 0.90 and test.pvalue < 0.05
        report(
            "goal-tolerance adaptation",
            ok,
            f"position-only 5-dof: {res.frac_within_1mm:.0%} goals < 1mm; "
            f"orientation errors worse than 6-dof full-pose (one-sided Mann-Whitney p={test.pvalue:.1e}), {elapsed:.0f}s",
        )
        assert res.frac_within_1mm >= 0.90
        assert test.pvalue < 0.05

    def test_design_determinism(self, tmp_path):
        import subprocess
        import sys

        t0 = time.time()
        scene_path = tmp_path / "scene.json"
        subprocess.run(
            [sys.executable, "-m", "morphforge.cli", "scene", "gen", "--goals", "3",
             "--obstacles", "2", "--max-dist", "0.7", "--seed", "7", "--out", str(scene_path)],
            check=True,
        )
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / run
            subprocess.run(
                [sys.executable, "-m", "morphforge.cli", "design", str(scene_path),
                 "--mode", "modular", "--dof", "4", "--seed", "7",
                 "--candidates", "2", "--adam-steps", "40", "--out", str(out)],
                check=True,
            )
            outputs.append((out / "design_result.json").read_bytes())
        identical = outputs[0] == outputs[1]
        elapsed = time.time() - t0
        report(
            "determinism",
            identical,
            f"design --seed 7 twice: byte-identical={identical} "
            f"({len(outputs[0])} bytes), {elapsed:.0f}s",
        )
        assert identical

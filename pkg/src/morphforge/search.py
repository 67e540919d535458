"""Baselines and benchmark harness: exhaustive modular enumeration, a genetic
algorithm with tournament selection and single-point crossover, random search,
and normalized-score reporting.

Every method funnels assembly evaluation through one memoized, batched
evaluator whose IK seeds are a pure hash of (config seed, slots, goal), so
methods share identical IK luck and repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .errors import SpaceTooLarge
from .geometry import DT
from .kinematics import (
    DesignMode,
    DesignParams,
    ModuleCatalog,
    assembly_count,
    build_robot,
    default_catalog,
)
from .objective import (
    LossBreakdown,
    LossWeights,
    benchmark_loss,
    build_context,
    combine_terms,
    eval_losses_t,
    normalized_score,
)
from .scene import Scene, ToleranceMode, sample_cluttered_task
from .solver import (
    Candidate,
    IKSet,
    SolverConfig,
    adam_ik_batch,
    design_task,
    dls_refine_batch,
)

_TOL_CODE = {
    ToleranceMode.FULL_POSE: 0,
    ToleranceMode.ROT_SYMMETRIC: 1,
    ToleranceMode.POSITION_ONLY: 2,
}

SOLVED_POS = 1e-3
SOLVED_ROT = math.radians(1.0)


@dataclass
class GAConfig:
    population: int = 128
    generations: int = 100
    tournament_size: int = 4
    mutation_prob: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if self.population < 2 or self.population % 2 != 0:
            raise ValueError("population must be even and >= 2")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must be in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "GAConfig":
        known = {f.name for f in fields(GAConfig)}
        return GAConfig(**{k: v for k, v in doc.items() if k in known})


@dataclass
class AssemblyEval:
    """One evaluated modular assembly."""

    slots: tuple[int, ...]
    bench: float
    fitness: float  # distance + collision terms only (GA fitness)
    breakdown: LossBreakdown
    q: np.ndarray  # (n, m)
    pos_err: np.ndarray  # (m,) unclipped
    rot_err: np.ndarray  # (m,) unclipped, tolerance-adjusted
    solved_goals: int

    @property
    def task_solved(self) -> bool:
        return self.solved_goals == len(self.pos_err)


class AssemblyEvaluator:
    """Batched, memoized evaluation of modular assemblies on one scene.

    IK initializations are derived from (seed, slots, goal index) alone, so
    the same assembly gets the same starts no matter which method asks.
    """

    def __init__(
        self,
        scene: Scene,
        catalog: ModuleCatalog,
        solver_cfg: SolverConfig,
        w: LossWeights,
        chunk_size: int = 256,
    ):
        self.scene = scene
        self.catalog = catalog
        self.cfg = solver_cfg
        self.w = w
        self.chunk_size = chunk_size
        self.cache: dict[tuple[int, ...], AssemblyEval] = {}
        self.evaluations = 0  # counts requests, including cache hits

    def _ik_starts(self, slots: tuple[int, ...], goal_idx: int, n: int) -> np.ndarray:
        ss = np.random.SeedSequence([self.cfg.rng_seed, goal_idx, *slots])
        rng = np.random.default_rng(ss)
        return rng.uniform(-math.pi, math.pi, size=(self.cfg.ik_starts_per_goal, n))

    def _evaluate_chunk(self, slots_list: list[tuple[int, ...]]) -> list[AssemblyEval]:
        scene, cfg, w = self.scene, self.cfg, self.w
        m = len(scene.goals)
        starts = cfg.ik_starts_per_goal
        robots = [build_robot(DesignParams(DesignMode.MODULAR, slots=s), self.catalog) for s in slots_list]
        n = robots[0].n
        a = len(robots)

        q0 = np.stack(
            [
                self._ik_starts(slots, g, n)
                for slots in slots_list
                for g in range(m)
            ]
        ).reshape(a, m, starts, n)

        b = a * m * starts
        prox = torch.as_tensor(np.stack([r.proximal for r in robots]), dtype=DT)
        dist = torch.as_tensor(np.stack([r.distal for r in robots]), dtype=DT)
        prox_b = prox.unsqueeze(1).unsqueeze(1).expand(a, m, starts, n, 4, 4).reshape(b, n, 4, 4)
        dist_b = dist.unsqueeze(1).unsqueeze(1).expand(a, m, starts, n, 4, 4).reshape(b, n, 4, 4)
        goal_pos = np.stack([g.pose.position for g in scene.goals])
        goal_rot = np.stack([g.pose.rotation.matrix for g in scene.goals])
        tol = np.array([_TOL_CODE[g.tolerance] for g in scene.goals], dtype=np.int64)
        gp = torch.as_tensor(goal_pos, dtype=DT).view(1, m, 1, 3).expand(a, m, starts, 3).reshape(b, 3)
        gr = torch.as_tensor(goal_rot, dtype=DT).view(1, m, 1, 3, 3).expand(a, m, starts, 3, 3).reshape(b, 3, 3)
        tl = torch.as_tensor(tol).view(1, m, 1).expand(a, m, starts).reshape(b)
        base_t = torch.as_tensor(scene.base_pose.matrix(), dtype=DT)

        q_ref, _, _, err = dls_refine_batch(
            torch.as_tensor(q0.reshape(b, n), dtype=DT),
            prox_b,
            None,
            dist_b,
            base_t,
            gp,
            gr,
            tl,
            w,
            cfg.ik_max_steps,
            cfg.dls_damping,
        )
        q_ref = q_ref.reshape(a, m, starts, n)
        err = err.reshape(a, m, starts)
        pick = err.argmin(dim=-1)  # (A, m)
        q_best = torch.gather(
            q_ref, 2, pick.view(a, m, 1, 1).expand(a, m, 1, n)
        ).squeeze(2)  # (A, m, n)

        ctx = build_context(scene, robots)
        q_opt = adam_ik_batch(ctx, q_best, w, cfg.adam_steps, cfg.lr_ik)

        with torch.no_grad():
            terms = eval_losses_t(ctx, q_opt, None, w, clipped=True, want_per_goal=True)
            from .solver import _pose_err_metrics_t
            from .kinematics import fk_frames_t

            # unclipped per-goal errors at the final configurations
            prox_f = ctx.prox.unsqueeze(1).expand(a, m, n, 4, 4)
            dist_f = ctx.dist_const.unsqueeze(1).expand(a, m, n, 4, 4)
            _, _, frames = fk_frames_t(q_opt, prox_f, dist_const=dist_f, base=ctx.base)
            _, pos_err, rot_err = _pose_err_metrics_t(
                torch.as_tensor(goal_pos, dtype=DT),
                torch.as_tensor(goal_rot, dtype=DT),
                torch.as_tensor(tol),
                frames[..., -1, :, :],
                w,
            )

        out = []
        for i, slots in enumerate(slots_list):
            bd = combine_terms(
                float(terms["distance"][i]),
                float(terms["collision"][i]),
                float(terms["hardware"][i]),
                0.0,
                w,
            )
            pe = pos_err[i].numpy()
            re = rot_err[i].numpy()
            tol_codes = tol
            solved = 0
            for g in range(m):
                ok = pe[g] < SOLVED_POS and (tol_codes[g] == 2 or re[g] < SOLVED_ROT)
                solved += int(ok)
            out.append(
                AssemblyEval(
                    slots=slots,
                    bench=benchmark_loss(bd, w),
                    fitness=w.w_d * bd.distance + w.w_col * bd.collision,
                    breakdown=bd,
                    q=q_opt[i].numpy().T.copy(),
                    pos_err=pe.copy(),
                    rot_err=re.copy(),
                    solved_goals=solved,
                )
            )
        return out

    def evaluate(self, slots_list: list[tuple[int, ...]]) -> list[AssemblyEval]:
        self.evaluations += len(slots_list)
        fresh = []
        seen = set()
        for s in slots_list:
            s = tuple(s)
            if s not in self.cache and s not in seen:
                fresh.append(s)
                seen.add(s)
        for i in range(0, len(fresh), self.chunk_size):
            chunk = fresh[i : i + self.chunk_size]
            for ev in self._evaluate_chunk(chunk):
                self.cache[ev.slots] = ev
        return [self.cache[tuple(s)] for s in slots_list]


def _eval_to_candidate(ev: AssemblyEval, score: float | None, provenance: dict) -> Candidate:
    return Candidate(
        params=DesignParams(DesignMode.MODULAR, slots=ev.slots),
        ik=IKSet(ev.q, [np.asarray([ev.q[:, g]]) for g in range(ev.q.shape[1])]),
        loss=ev.breakdown,
        bench=ev.bench,
        score=score,
        solved_goals=ev.solved_goals,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# brute force
# ---------------------------------------------------------------------------


@dataclass
class BruteForceResult:
    entries: list[AssemblyEval]
    loss_min: float
    loss_max: float
    scores: np.ndarray

    @property
    def best(self) -> AssemblyEval:
        return min(self.entries, key=lambda e: e.bench)

    def score_of(self, bench: float) -> float:
        return normalized_score(bench, self.loss_min, self.loss_max)


def brute_force(
    scene: Scene,
    catalog: ModuleCatalog | None = None,
    dof: int = 6,
    solver_cfg: SolverConfig | None = None,
    w: LossWeights | None = None,
    cap: int = 20000,
    evaluator: AssemblyEvaluator | None = None,
) -> BruteForceResult:
    """Evaluate every assembly in the design space with shared IK seeds."""
    catalog = catalog or default_catalog()
    solver_cfg = solver_cfg or SolverConfig()
    w = w or LossWeights()
    total = assembly_count(catalog, dof)
    if total > cap:
        raise SpaceTooLarge(f"{total} assemblies exceed the cap of {cap}")
    ev = evaluator or AssemblyEvaluator(scene, catalog, solver_cfg, w)
    k = len(catalog.choices)
    all_slots = [
        tuple(idx) for idx in np.ndindex(*([k] * dof))
    ]
    entries = ev.evaluate(all_slots)
    losses = np.array([e.bench for e in entries])
    loss_min, loss_max = float(losses.min()), float(losses.max())
    scores = np.array([normalized_score(l, loss_min, loss_max) for l in losses])
    return BruteForceResult(entries, loss_min, loss_max, scores)


# ---------------------------------------------------------------------------
# genetic algorithm
# ---------------------------------------------------------------------------


def _mutate(genome: np.ndarray, prob: float, rng: np.random.Generator, k: int) -> np.ndarray:
    out = genome.copy()
    mask = rng.uniform(size=len(out)) < prob
    out[mask] = rng.integers(0, k, int(mask.sum()))
    return out


def _crossover(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    point = int(rng.integers(1, len(p1))) if len(p1) > 1 else 0
    c1 = np.concatenate([p1[:point], p2[point:]])
    c2 = np.concatenate([p2[:point], p1[point:]])
    return c1, c2


def _tournament(fitness: np.ndarray, size: int, rng: np.random.Generator) -> int:
    idx = rng.integers(0, len(fitness), size)
    return int(idx[np.argmin(fitness[idx])])


@dataclass
class GAHistory:
    best: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    evaluations: int = 0  # genome evaluations requested (with repeats)
    unique_evaluations: int = 0  # distinct genomes evaluated


def genetic_search(
    scene: Scene,
    catalog: ModuleCatalog | None = None,
    dof: int = 6,
    ga: GAConfig | None = None,
    solver_cfg: SolverConfig | None = None,
    w: LossWeights | None = None,
    evaluator: AssemblyEvaluator | None = None,
) -> tuple[Candidate, GAHistory]:
    """Tournament-selection GA over slot-index genomes.

    Elitist (mu+lambda) truncation: each generation's offspring compete with
    their parents and the best population-size genomes survive, so the
    per-generation best fitness never increases. Truncation prefers distinct
    genomes, which keeps the population from collapsing to clones in small
    design spaces. Fitness is the distance plus collision loss; hardware
    cost is reported but not selected on.
    """
    catalog = catalog or default_catalog()
    ga = ga or GAConfig()
    solver_cfg = solver_cfg or SolverConfig()
    w = w or LossWeights()
    ev = evaluator or AssemblyEvaluator(scene, catalog, solver_cfg, w)
    k = len(catalog.choices)
    rng = np.random.default_rng(ga.rng_seed)

    history = GAHistory()
    seen: set[tuple[int, ...]] = set()

    def evaluate(genomes: list[np.ndarray]) -> np.ndarray:
        keys = [tuple(int(v) for v in g) for g in genomes]
        history.evaluations += len(keys)
        seen.update(keys)
        evals = ev.evaluate(keys)
        return np.array([e.fitness for e in evals])

    pop = [rng.integers(0, k, dof) for _ in range(ga.population)]
    fitness = evaluate(pop)
    for _ in range(ga.generations):
        offspring = []
        while len(offspring) < ga.population:
            i1 = _tournament(fitness, ga.tournament_size, rng)
            i2 = _tournament(fitness, ga.tournament_size, rng)
            c1, c2 = _crossover(pop[i1], pop[i2], rng)
            offspring.append(_mutate(c1, ga.mutation_prob, rng, k))
            if len(offspring) < ga.population:
                offspring.append(_mutate(c2, ga.mutation_prob, rng, k))
        off_fitness = evaluate(offspring)
        combined = pop + offspring
        combined_fitness = np.concatenate([fitness, off_fitness])
        order = np.argsort(combined_fitness, kind="stable")
        new_pop: list[np.ndarray] = []
        new_fitness: list[float] = []
        used: set[tuple[int, ...]] = set()
        for i in order:  # distinct genomes first
            key = tuple(int(v) for v in combined[i])
            if key in used:
                continue
            used.add(key)
            new_pop.append(combined[i])
            new_fitness.append(float(combined_fitness[i]))
            if len(new_pop) == ga.population:
                break
        for i in order:  # pad with duplicates when the space is tiny
            if len(new_pop) == ga.population:
                break
            new_pop.append(combined[i])
            new_fitness.append(float(combined_fitness[i]))
        pop = new_pop
        fitness = np.asarray(new_fitness)
        history.best.append(float(fitness[0]))
        history.mean.append(float(fitness.mean()))
    history.unique_evaluations = len(seen)
    best_eval = ev.evaluate([tuple(int(v) for v in pop[0])])[0]
    cand = _eval_to_candidate(best_eval, None, {"method": "ga", "seed": int(ga.rng_seed)})
    return cand, history


def random_search(
    scene: Scene,
    catalog: ModuleCatalog | None = None,
    dof: int = 6,
    budget: int = 1,
    solver_cfg: SolverConfig | None = None,
    w: LossWeights | None = None,
    rng_seed: int = 0,
    evaluator: AssemblyEvaluator | None = None,
) -> Candidate:
    """Uniform assemblies, best by benchmark loss."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    catalog = catalog or default_catalog()
    solver_cfg = solver_cfg or SolverConfig()
    w = w or LossWeights()
    ev = evaluator or AssemblyEvaluator(scene, catalog, solver_cfg, w)
    k = len(catalog.choices)
    rng = np.random.default_rng(rng_seed)
    draws = [tuple(int(v) for v in rng.integers(0, k, dof)) for _ in range(budget)]
    evals = ev.evaluate(draws)
    best = min(evals, key=lambda e: e.bench)
    return _eval_to_candidate(best, None, {"method": "random", "seed": int(rng_seed)})


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------


@dataclass
class BenchmarkReport:
    tasks: list[dict]
    aggregate: dict

    def to_dict(self) -> dict:
        return {"tasks": self.tasks, "aggregate": self.aggregate}


def _percentiles(scores: np.ndarray) -> dict:
    return {
        "min": float(scores.min()),
        "p10": float(np.percentile(scores, 10)),
        "p25": float(np.percentile(scores, 25)),
        "median": float(np.percentile(scores, 50)),
        "p75": float(np.percentile(scores, 75)),
        "p90": float(np.percentile(scores, 90)),
        "max": float(scores.max()),
    }


def run_benchmark(
    task_seeds: list[int],
    methods: list[str],
    dof: int = 4,
    n_goals: int = 4,
    n_obstacles: int = 4,
    max_dist: float = 0.8,
    catalog: ModuleCatalog | None = None,
    solver_cfg: SolverConfig | None = None,
    ga_cfg: GAConfig | None = None,
    w: LossWeights | None = None,
    out_dir: str | Path | None = None,
    rs_budget: int | None = None,
) -> BenchmarkReport:
    """Evaluate methods over seeded cluttered tasks with normalized scores.

    Normalized scores need the brute-force distribution, so "bf" must be in
    methods whenever any other method is scored. Membership in the top 10%
    means reaching at least the 90th-percentile brute-force score.
    """
    methods = list(methods)
    if any(m != "bf" for m in methods) and "bf" not in methods:
        raise ValueError("brute force is required to compute normalized scores")
    catalog = catalog or default_catalog()
    solver_cfg = solver_cfg or SolverConfig()
    ga_cfg = ga_cfg or GAConfig()
    w = w or LossWeights()
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    task_rows = []
    for task_seed in task_seeds:
        scene = sample_cluttered_task(
            n_goals, n_obstacles, max_dist, rng=np.random.default_rng(task_seed), seed=task_seed
        )
        evaluator = AssemblyEvaluator(scene, catalog, solver_cfg, w)
        row: dict = {"task_seed": int(task_seed), "methods": {}}
        bf_res: BruteForceResult | None = None

        if "bf" in methods:
            t0 = time.time()
            bf_res = brute_force(scene, catalog, dof, solver_cfg, w, evaluator=evaluator)
            best = bf_res.best
            row["bf_distribution"] = _percentiles(bf_res.scores)
            row["methods"]["bf"] = {
                "best_score": 1.0,
                "best_loss": bf_res.loss_min,
                "solved_goals": int(best.solved_goals),
                "task_solved": bool(best.task_solved),
                "wall_clock_s": time.time() - t0,
            }
        threshold = float(np.percentile(bf_res.scores, 90)) if bf_res else None

        def method_entry(bench: float, solved_goals: int, n_goals_: int, t0: float, extra=None):
            score = bf_res.score_of(bench) if bf_res else None
            entry = {
                "best_score": score,
                "best_loss": float(bench),
                "solved_goals": int(solved_goals),
                "task_solved": bool(solved_goals == n_goals_),
                "in_top10": bool(score >= threshold) if score is not None else None,
                "wall_clock_s": time.time() - t0,
            }
            if extra:
                entry.update(extra)
            return entry

        if "pipeline" in methods:
            t0 = time.time()
            pipe_seed = int(np.random.SeedSequence([solver_cfg.rng_seed, task_seed, 1]).generate_state(1)[0])
            cfg = SolverConfig(**{**solver_cfg.to_dict(), "rng_seed": pipe_seed})
            cands = design_task(scene, DesignMode.MODULAR, dof, cfg, w, catalog)
            best = cands[0]
            scores = [bf_res.score_of(c.bench) for c in cands] if bf_res else []
            row["methods"]["pipeline"] = method_entry(
                best.bench, best.solved_goals, n_goals, t0,
                extra={"median_score": float(np.median(scores)) if scores else None},
            )

        if "ga" in methods:
            t0 = time.time()
            ga_seed = int(np.random.SeedSequence([ga_cfg.rng_seed, task_seed, 2]).generate_state(1)[0])
            cfg_ga = GAConfig(**{**ga_cfg.to_dict(), "rng_seed": ga_seed})
            ga_best, history = genetic_search(scene, catalog, dof, cfg_ga, solver_cfg, w, evaluator=evaluator)
            row["methods"]["ga"] = method_entry(
                ga_best.bench, ga_best.solved_goals, n_goals, t0,
                extra={"history_best": history.best[-1], "generations": len(history.best)},
            )

        if "random" in methods:
            t0 = time.time()
            budget = rs_budget or ga_cfg.population * ga_cfg.generations
            rs_seed = int(np.random.SeedSequence([ga_cfg.rng_seed, task_seed, 3]).generate_state(1)[0])
            rs_best = random_search(
                scene, catalog, dof, budget, solver_cfg, w, rng_seed=rs_seed, evaluator=evaluator
            )
            row["methods"]["random"] = method_entry(rs_best.bench, rs_best.solved_goals, n_goals, t0)

        task_rows.append(row)
        if out_path is not None and bf_res is not None:
            task_dir = out_path / f"task_{task_seed}"
            task_dir.mkdir(exist_ok=True)
            with open(task_dir / "scores.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["slots", "benchmark_loss", "score", "solved_goals"])
                for e, s in zip(bf_res.entries, bf_res.scores):
                    writer.writerow(["-".join(map(str, e.slots)), f"{e.bench:.12g}", f"{s:.12g}", e.solved_goals])

    aggregate: dict = {"n_tasks": len(task_seeds)}
    for name in methods:
        if name == "bf":
            continue
        flags = [r["methods"][name]["in_top10"] for r in task_rows if name in r["methods"]]
        scores = [r["methods"][name]["best_score"] for r in task_rows if name in r["methods"]]
        aggregate[name] = {
            "top10_fraction": float(np.mean([bool(f) for f in flags])) if flags else None,
            "mean_best_score": float(np.mean(scores)) if scores else None,
        }

    report = BenchmarkReport(task_rows, aggregate)
    if out_path is not None:
        with open(out_path / "report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        with open(out_path / "summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["task_seed", "method", "best_score", "best_loss", "solved_goals", "task_solved", "in_top10", "wall_clock_s"])
            for r in task_rows:
                for name, entry in r["methods"].items():
                    writer.writerow([
                        r["task_seed"], name,
                        entry.get("best_score"), entry.get("best_loss"),
                        entry.get("solved_goals"), entry.get("task_solved"),
                        entry.get("in_top10"), f"{entry.get('wall_clock_s', 0):.2f}",
                    ])
    return report

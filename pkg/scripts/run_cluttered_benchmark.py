#!/usr/bin/env python3
"""Cluttered-environment benchmark: brute force vs GA vs random vs pipeline.

Desk-scale defaults (dof 4, 625 assemblies, 4 goals / 4 obstacles per task);
pass --dof 6 --cap 20000 for larger spaces if you have the patience.
"""

import argparse
import json

from morphforge.objective import LossWeights
from morphforge.search import GAConfig, run_benchmark
from morphforge.solver import SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tasks", type=int, default=10)
    ap.add_argument("--dof", type=int, default=4)
    ap.add_argument("--goals", type=int, default=4)
    ap.add_argument("--obstacles", type=int, default=4)
    ap.add_argument("--max-dist", type=float, default=0.8)
    ap.add_argument("--population", type=int, default=32)
    ap.add_argument("--generations", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="bench_out")
    args = ap.parse_args()

    report = run_benchmark(
        task_seeds=[args.seed * 1000 + i for i in range(args.tasks)],
        methods=["bf", "pipeline", "ga", "random"],
        dof=args.dof,
        n_goals=args.goals,
        n_obstacles=args.obstacles,
        max_dist=args.max_dist,
        solver_cfg=SolverConfig(rng_seed=args.seed),
        ga_cfg=GAConfig(population=args.population, generations=args.generations, rng_seed=args.seed),
        w=LossWeights(include_hardware_in_benchmark=False),
        out_dir=args.out,
    )
    print(json.dumps(report.aggregate, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()

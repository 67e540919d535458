#!/usr/bin/env python3
"""Workspace-size adaptation: scale the workspace box 0.5x-1.5x and measure
the correlation between scale and the total reach of generated designs."""

import argparse

from morphforge.experiments import workspace_scaling_experiment
from morphforge.solver import SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scales", type=int, default=10)
    ap.add_argument("--designs-per-scale", type=int, default=10)
    ap.add_argument("--goals", type=int, default=8)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()

    res = workspace_scaling_experiment(
        n_scales=args.scales,
        designs_per_scale=args.designs_per_scale,
        goals_per_design=args.goals,
        config=SolverConfig(n_candidates=2, ik_starts_per_goal=2, adam_steps=120, rng_seed=args.seed),
        seed=args.seed,
    )
    print(f"{len(res.scales)} designs: pearson r = {res.pearson_r:.3f} (p = {res.p_value:.2e})")
    for s in sorted(set(res.scales)):
        sel = res.scales == s
        print(f"  scale {s:.2f}: mean total reach {res.reaches[sel].mean():.2f} m")


if __name__ == "__main__":
    main()

"""Render-ready geometry export: world-frame capsules per goal configuration,
joint frames, per-goal errors and solved flags for each candidate.

The studio client draws exactly this payload and never recomputes kinematics.
"""

from __future__ import annotations

import numpy as np

from .kinematics import ModuleCatalog, build_robot, forward_kinematics
from .objective import pose_errors, solved_check
from .scene import Scene
from .solver import Candidate


def _world_capsules(robot, body_poses) -> list[dict]:
    out = []
    for spec in robot.capsule_specs:
        pose = body_poses[spec.body]
        a = pose.transform_point(spec.a_local)
        b = pose.transform_point(spec.b_local)
        out.append(
            {
                "a": [float(v) for v in a],
                "b": [float(v) for v in b],
                "radius": float(spec.radius),
            }
        )
    return out


def build_render_model(
    scene: Scene,
    candidates: list[Candidate],
    catalog: ModuleCatalog | None = None,
) -> dict:
    """Geometry and per-goal diagnostics for every candidate, world frame."""
    from .kinematics import fk_frames_t, robot_tensors  # body frames via FK core
    import torch
    from .geometry import DT, Pose

    entries = []
    for cand in candidates:
        robot = build_robot(cand.params, catalog)
        t = robot_tensors(robot)
        base_t = torch.as_tensor(scene.base_pose.matrix(), dtype=DT)
        per_goal = []
        for g, goal in enumerate(scene.goals):
            q = cand.ik.q[:, g]
            with torch.no_grad():
                _, body_frames, frames = fk_frames_t(
                    torch.as_tensor(q, dtype=DT),
                    t["prox"],
                    rows=t["rows"],
                    dist_const=t["dist"] if t["rows"] is None else None,
                    base=base_t,
                )
            body_poses = [Pose.from_matrix(body_frames[i].numpy()) for i in range(robot.n)]
            joint_frames = [
                {
                    "position": [float(v) for v in frames[i, :3, 3]],
                    "orientation6d": [float(v) for v in np.concatenate([frames[i, :3, 0], frames[i, :3, 1]])],
                }
                for i in range(robot.n)
            ]
            ee = Pose.from_matrix(frames[-1].numpy())
            pos_err, rot_err = pose_errors(goal, ee)
            per_goal.append(
                {
                    "goal_id": goal.id,
                    "q": [float(v) for v in q],
                    "capsules": _world_capsules(robot, body_poses),
                    "joint_frames": joint_frames,
                    "solved": bool(solved_check(goal, ee)),
                    "pos_error_m": float(pos_err),
                    "rot_error_rad": float(rot_err),
                }
            )
        entries.append(
            {
                "params": cand.params.to_dict(),
                "loss": cand.loss.to_dict(),
                "benchmark_loss": float(cand.bench),
                "solved_goals": int(cand.solved_goals),
                "per_goal": per_goal,
            }
        )
    return {"candidates": entries}

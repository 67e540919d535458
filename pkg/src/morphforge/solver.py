"""End-to-end design pipeline: diversity-enforced candidate seeding,
multi-start damped-least-squares IK, Adam co-optimization of morphology and
joint angles, and candidate ranking.

All randomness is drawn from numpy Generators derived from one master seed,
so identical (scene, config, seed) produce identical rankings.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np
import torch

from .errors import JobCancelled, NonFinite, SamplingExhausted
from .geometry import DT, Pose, angle_from_trace_t
from .kinematics import (
    DesignMode,
    DesignParams,
    ECON_ALPHAS,
    FREE_A_MAX,
    FREE_D_MAX,
    ModuleCatalog,
    RobotModel,
    build_robot,
    default_catalog,
    fk_frames_t,
    forward_kinematics,
    geometric_jacobian_t,
    total_reach,
    wrap_angles,
)
from .modes import (
    TEMP_END,
    branch_value,
    econ_logits_from_rows,
    gumbel_noise,
    gumbel_softmax_t,
    squash_free,
    temperature,
    unsquash_free,
)
from .objective import (
    LossBreakdown,
    LossWeights,
    RAD2DEG,
    benchmark_loss,
    build_context,
    combine_terms,
    eval_losses_t,
    pose_errors,
    solved_check,
)
from .scene import Goal, Scene, ToleranceMode

ProgressFn = Callable[[dict], None]
CancelFn = Callable[[], bool]


@dataclass
class SolverConfig:
    n_candidates: int = 8
    ik_starts_per_goal: int = 4
    ik_max_steps: int = 50
    adam_steps: int = 200
    lr_ik: float = 0.1
    lr_params: float = 0.01
    dls_damping: float = 1e-4
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_candidates", "ik_starts_per_goal", "ik_max_steps", "adam_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("lr_ik", "lr_params", "dls_damping"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "SolverConfig":
        known = {f.name for f in fields(SolverConfig)}
        return SolverConfig(**{k: v for k, v in doc.items() if k in known})


@dataclass
class IKSet:
    """Selected joint vector per goal plus the refined alternates."""

    q: np.ndarray  # (n, m)
    alternates: list[np.ndarray]  # per goal: (starts, n)

    def to_dict(self) -> dict:
        return {
            "q": [[float(v) for v in row] for row in self.q],
            "alternates": [
                [[float(v) for v in alt] for alt in goal_alts] for goal_alts in self.alternates
            ],
        }


@dataclass
class Candidate:
    params: DesignParams
    ik: IKSet
    loss: LossBreakdown
    bench: float
    score: float | None
    solved_goals: int
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "ik": self.ik.to_dict(),
            "loss": self.loss.to_dict(),
            "benchmark_loss": float(self.bench),
            "score": None if self.score is None else float(self.score),
            "solved_goals": int(self.solved_goals),
            "provenance": self.provenance,
        }


# ---------------------------------------------------------------------------
# candidate seeding
# ---------------------------------------------------------------------------


def _sample_params(mode: DesignMode, dof: int, rng: np.random.Generator, n_choices: int) -> DesignParams:
    if mode is DesignMode.MODULAR:
        return DesignParams(mode, slots=tuple(int(s) for s in rng.integers(0, n_choices, dof)))
    if mode is DesignMode.FREE:
        rows = np.column_stack(
            [
                rng.uniform(0.0, FREE_D_MAX, dof),
                rng.uniform(-FREE_A_MAX, FREE_A_MAX, dof),
                rng.uniform(-math.pi, math.pi, dof),
            ]
        )
        return DesignParams(mode, rows=rows)
    d = np.where(rng.uniform(size=dof) < 0.3, 0.0, rng.uniform(0.1, 0.4, dof))
    a_mag = rng.uniform(0.1, 0.4, dof)
    a_cls = rng.integers(0, 3, dof)  # 0 -> zero, 1 -> negative, 2 -> positive
    a = np.where(a_cls == 0, 0.0, np.where(a_cls == 1, -a_mag, a_mag))
    alpha = np.asarray(ECON_ALPHAS)[rng.integers(0, 3, dof)]
    return DesignParams(DesignMode.ECONOMIC, rows=np.column_stack([d, a, alpha]))


def _seed_vector(p: DesignParams, n_choices: int) -> np.ndarray:
    if p.mode is DesignMode.MODULAR:
        vec = np.zeros(len(p.slots) * n_choices)
        for i, s in enumerate(p.slots):
            vec[i * n_choices + s] = 1.0
        return vec
    return p.rows.reshape(-1)


def _prescreen_scores(
    scene: Scene,
    candidates: list[DesignParams],
    catalog: ModuleCatalog | None,
    rng: np.random.Generator,
    w: LossWeights,
    ik_steps: int,
) -> np.ndarray:
    """Crude per-goal task scores (A, m): one short IK pass per goal, then the
    distance+collision loss at the resulting configurations."""
    robots = [build_robot(p, catalog) for p in candidates]
    m = len(scene.goals)
    a = len(robots)
    n = robots[0].n
    q0 = rng.uniform(-math.pi, math.pi, size=(a, m, n))
    b = a * m
    prox = torch.as_tensor(
        np.repeat(np.stack([r.proximal for r in robots]), m, axis=0), dtype=DT
    )
    if robots[0].rows is not None:
        rows = torch.as_tensor(
            np.repeat(np.stack([r.rows for r in robots]), m, axis=0), dtype=DT
        )
        dist = None
    else:
        rows = None
        dist = torch.as_tensor(
            np.repeat(np.stack([r.distal for r in robots]), m, axis=0), dtype=DT
        )
    goal_pos = np.stack([g.pose.position for g in scene.goals])
    goal_rot = np.stack([g.pose.rotation.matrix for g in scene.goals])
    tol_map = {"full_pose": 0, "rot_symmetric": 1, "position_only": 2}
    tol = np.array([tol_map[g.tolerance.value] for g in scene.goals], dtype=np.int64)
    base_t = torch.as_tensor(scene.base_pose.matrix(), dtype=DT)
    q_ref, _, _, _ = dls_refine_batch(
        torch.as_tensor(q0.reshape(b, n), dtype=DT),
        prox,
        rows,
        dist,
        base_t,
        torch.as_tensor(np.tile(goal_pos, (a, 1)), dtype=DT),
        torch.as_tensor(np.tile(goal_rot, (a, 1, 1)), dtype=DT),
        torch.as_tensor(np.tile(tol, a)),
        w,
        ik_steps,
    )
    ctx = build_context(scene, robots)
    with torch.no_grad():
        terms = eval_losses_t(
            ctx, q_ref.reshape(a, m, n), None, w, clipped=True, want_per_goal=True
        )
        per_goal = (
            w.w_d * terms["distance_per_goal"] + w.w_col * terms["collision_per_goal"]
        )
    return per_goal.numpy()


def seed_candidates(
    scene: Scene,
    mode: DesignMode,
    dof: int,
    n: int,
    rng: np.random.Generator,
    catalog: ModuleCatalog | None = None,
    diversity_floor: float = 0.1,
    max_resamples: int = 1000,
    w: LossWeights | None = None,
    prescreen_pool: int = 48,
    prescreen_ik_steps: int = 15,
    prescreen_repeats: int = 2,
    reach_cap_factor: float | None = None,
) -> list[DesignParams]:
    """Sample n mode-valid designs, standing in for the learned designer.

    Every seed's total reach covers the farthest goal and pairwise L1
    distances between seeds stay above the floor (the diversity pressure).
    Candidates are drawn as a larger pool, ranked by a crude one-start IK
    score against the scene, and the best floor-compatible n are kept;
    prescreen_pool=1 disables the ranking. reach_cap_factor additionally
    rejects seeds longer than that multiple of the farthest goal distance.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    w = w or LossWeights()
    n_choices = len(catalog.choices) if catalog is not None else 5
    need = scene.max_goal_distance
    cap = math.inf if reach_cap_factor is None else reach_cap_factor * need
    pool_target = max(n, n * max(1, prescreen_pool))
    pool: list[DesignParams] = []
    vecs: list[np.ndarray] = []
    tries = 0
    budget = max_resamples * n
    while len(pool) < pool_target and tries < budget:
        tries += 1
        cand = _sample_params(mode, dof, rng, n_choices)
        reach = total_reach(cand, catalog)
        if reach < need:
            continue
        if reach > cap:
            if mode is not DesignMode.FREE:
                continue
            # free-mode lengths scale continuously; shrink into the window
            target = rng.uniform(need, cap)
            rows = cand.rows.copy()
            rows[:, 0] *= target / reach
            rows[:, 1] *= target / reach
            cand = DesignParams(DesignMode.FREE, rows=rows)
        vec = _seed_vector(cand, n_choices)
        if any(np.array_equal(vec, v) for v in vecs):
            continue
        pool.append(cand)
        vecs.append(vec)
    if len(pool) < n:
        raise SamplingExhausted(
            f"only {len(pool)} valid seeds after {budget} tries (reach needed {need:.3f})"
        )

    if len(pool) > n:
        per_goal = None
        for _ in range(max(1, prescreen_repeats)):
            s = _prescreen_scores(scene, pool, catalog, rng, w, prescreen_ik_steps)
            per_goal = s if per_goal is None else np.minimum(per_goal, s)
        order = np.argsort(per_goal.sum(axis=1), kind="stable")
    else:
        order = np.arange(len(pool))

    out: list[DesignParams] = []
    out_vecs: list[np.ndarray] = []
    for idx in order:
        vec = vecs[idx]
        if any(np.abs(vec - v).sum() <= diversity_floor for v in out_vecs):
            continue
        out.append(pool[idx])
        out_vecs.append(vec)
        if len(out) == n:
            break
    if len(out) < n:
        raise SamplingExhausted(
            f"diversity floor {diversity_floor} left only {len(out)} of {len(pool)} seeds"
        )
    return out


# ---------------------------------------------------------------------------
# damped-least-squares IK
# ---------------------------------------------------------------------------


def _rotation_error_t(goal_rot: torch.Tensor, ee_rot: torch.Tensor) -> torch.Tensor:
    """Axis-angle of R_goal * R_ee^T, batched; (..., 3)."""
    r_err = goal_rot @ ee_rot.transpose(-1, -2)
    tr = r_err.diagonal(dim1=-2, dim2=-1).sum(-1)
    v = torch.stack(
        [
            r_err[..., 2, 1] - r_err[..., 1, 2],
            r_err[..., 0, 2] - r_err[..., 2, 0],
            r_err[..., 1, 0] - r_err[..., 0, 1],
        ],
        dim=-1,
    ) / 2.0
    s = torch.sqrt(torch.clamp((v * v).sum(-1), min=1e-300))
    theta = torch.atan2(s, (tr - 1.0) / 2.0)
    near_pi = theta > math.pi - 1e-4
    scale = torch.where(s > 1e-8, theta / torch.clamp(s, min=1e-12), torch.ones_like(s))
    omega = v * scale.unsqueeze(-1)
    # near pi the skew part vanishes; R + I = 2 axis axis^T there, so the
    # dominant column gives the axis (sign is immaterial at half a turn)
    m = r_err + torch.eye(3, dtype=r_err.dtype)
    k = m.diagonal(dim1=-2, dim2=-1).argmax(dim=-1)
    col = torch.gather(m, -1, k.view(*k.shape, 1, 1).expand(*k.shape, 3, 1)).squeeze(-1)
    axis = col / torch.clamp(torch.linalg.norm(col, dim=-1, keepdim=True), min=1e-12)
    omega_pi = axis * theta.unsqueeze(-1)
    return torch.where(near_pi.unsqueeze(-1), omega_pi, omega)


def _pose_err_metrics_t(
    goal_pos: torch.Tensor,
    goal_rot: torch.Tensor,
    tol_code: torch.Tensor,
    ee: torch.Tensor,
    w: LossWeights,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(weighted unclipped distance, position error, rotation metric in rad)."""
    ee_pos = ee[..., :3, 3]
    ee_rot = ee[..., :3, :3]
    pos_err = torch.linalg.norm(goal_pos - ee_pos, dim=-1)
    r_rel = goal_rot.transpose(-1, -2) @ ee_rot
    tr = r_rel.diagonal(dim1=-2, dim2=-1).sum(-1)
    full_angle = angle_from_trace_t(tr)
    sym_angle = torch.acos(torch.clamp(r_rel[..., 2, 2], -1.0, 1.0))
    zero = torch.zeros_like(full_angle)
    rot_metric = torch.where(
        tol_code == 0, full_angle, torch.where(tol_code == 1, sym_angle, zero)
    )
    slot = torch.where(
        tol_code == 0,
        full_angle * RAD2DEG,
        torch.where(tol_code == 1, (1.0 - r_rel[..., 2, 2]) / 2.0, zero),
    )
    dist = pos_err + w.w_r_rot * slot
    return dist, pos_err, rot_metric


def dls_refine_batch(
    q0: torch.Tensor,  # (B, n)
    prox: torch.Tensor,  # (B, n, 4, 4)
    rows: torch.Tensor | None,  # (B, n, 3)
    dist_const: torch.Tensor | None,  # (B, n, 4, 4)
    base: torch.Tensor,  # (4, 4)
    goal_pos: torch.Tensor,  # (B, 3)
    goal_rot: torch.Tensor,  # (B, 3, 3)
    tol_code: torch.Tensor,  # (B,)
    w: LossWeights,
    max_steps: int,
    lam0: float = 1e-4,
    pos_tol: float = 1e-6,
    rot_tol: float = 1e-6,
    err_clamp_pos: float = 0.0,
    err_clamp_ang: float = 0.0,
    step_clamp: float = 0.0,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Levenberg-damped pseudo-inverse iteration toward each goal.

    Rotation-error rows are projected out per the goal tolerance. Steps are
    accepted by the least-squares error norm the update direction minimizes;
    damping doubles on rejected steps and halves on accepted ones. Returns
    the best-seen iterate by unclipped weighted pose distance, plus its
    position and rotation errors.
    """
    b, n = q0.shape
    eye6 = torch.eye(6, dtype=DT)

    def fk(q):
        axis, _, frames = fk_frames_t(q, prox, rows=rows, dist_const=dist_const, base=base)
        return axis, frames[..., -1, :, :]

    with torch.no_grad():
        z_goal = goal_rot[..., :3, 2]
        proj = torch.eye(3, dtype=DT) - z_goal.unsqueeze(-1) * z_goal.unsqueeze(-2)
        sel_full = (tol_code == 0).view(b, 1, 1)
        sel_sym = (tol_code == 1).view(b, 1, 1)
        ang_proj = torch.where(
            sel_full,
            torch.eye(3, dtype=DT).expand(b, 3, 3),
            torch.where(sel_sym, proj, torch.zeros(b, 3, 3, dtype=DT)),
        )

        def residual(ee):
            e_pos = goal_pos - ee[..., :3, 3]
            e_ang = _rotation_error_t(goal_rot, ee[..., :3, :3])
            e_ang = (ang_proj @ e_ang.unsqueeze(-1)).squeeze(-1)
            return torch.cat([e_pos, e_ang], dim=-1)

        q = q0.clone()
        axis, ee = fk(q)
        dist, pos_err, rot_err = _pose_err_metrics_t(goal_pos, goal_rot, tol_code, ee, w)
        e = residual(ee)
        ls = (e * e).sum(-1)
        q_best = q.clone()
        dist_best = dist.clone()
        pos_best = pos_err.clone()
        rot_best = rot_err.clone()
        lam = torch.full((b,), lam0, dtype=DT)

        def clamp_block(vec, cap):
            if cap <= 0:
                return vec
            norm = torch.linalg.norm(vec, dim=-1, keepdim=True)
            return vec * torch.clamp(cap / torch.clamp(norm, min=1e-12), max=1.0)

        for _ in range(max_steps):
            converged = (pos_best < pos_tol) & (rot_best < rot_tol)
            if bool(converged.all()):
                break
            jac = geometric_jacobian_t(axis, ee[..., :3, 3])  # (B, 6, n)
            jac = torch.cat([jac[:, :3], ang_proj @ jac[:, 3:]], dim=1)
            jjt = jac @ jac.transpose(-1, -2) + lam.view(b, 1, 1) * eye6
            e_step = torch.cat(
                [clamp_block(e[:, :3], err_clamp_pos), clamp_block(e[:, 3:], err_clamp_ang)],
                dim=-1,
            )
            dq = (jac.transpose(-1, -2) @ torch.linalg.solve(jjt, e_step.unsqueeze(-1))).squeeze(-1)
            dq = clamp_block(dq, step_clamp)
            q_new = (q + dq + math.pi) % (2.0 * math.pi) - math.pi
            axis_new, ee_new = fk(q_new)
            e_new = residual(ee_new)
            ls_new = (e_new * e_new).sum(-1)
            dist_new, pos_new, rot_new = _pose_err_metrics_t(
                goal_pos, goal_rot, tol_code, ee_new, w
            )
            accept = (ls_new < ls) & ~converged
            q = torch.where(accept.view(b, 1), q_new, q)
            ls = torch.where(accept, ls_new, ls)
            e = torch.where(accept.view(b, 1), e_new, e)
            ee = torch.where(accept.view(b, 1, 1), ee_new, ee)
            axis = torch.where(accept.view(b, 1, 1, 1), axis_new, axis)
            lam = torch.where(
                accept, torch.clamp(lam / 2.0, min=1e-8), torch.clamp(lam * 2.0, max=1.0)
            )
            better = accept & (dist_new < dist_best)
            q_best = torch.where(better.view(b, 1), q_new, q_best)
            dist_best = torch.where(better, dist_new, dist_best)
            pos_best = torch.where(better, pos_new, pos_best)
            rot_best = torch.where(better, rot_new, rot_best)
    return q_best, pos_best, rot_best, dist_best


def _robot_batch_tensors(robot: RobotModel, b: int):
    prox = torch.as_tensor(robot.proximal, dtype=DT).expand(b, robot.n, 4, 4)
    if robot.rows is not None:
        rows = torch.as_tensor(robot.rows, dtype=DT).expand(b, robot.n, 3)
        return prox, rows, None
    dist = torch.as_tensor(robot.distal, dtype=DT).expand(b, robot.n, 4, 4)
    return prox, None, dist


def ik_refine(
    robot: RobotModel,
    goal: Goal,
    q0: np.ndarray,
    config: SolverConfig | None = None,
    base: Pose | None = None,
    w: LossWeights | None = None,
) -> np.ndarray:
    """Single-goal damped-least-squares refinement; returns the best iterate."""
    config = config or SolverConfig()
    w = w or LossWeights()
    q0 = np.asarray(q0, dtype=float).reshape(1, -1)
    prox, rows, dist = _robot_batch_tensors(robot, 1)
    base_t = torch.as_tensor((base or Pose.identity()).matrix(), dtype=DT)
    tol = {"full_pose": 0, "rot_symmetric": 1, "position_only": 2}[goal.tolerance.value]
    q_best, _, _, _ = dls_refine_batch(
        torch.as_tensor(q0, dtype=DT),
        prox,
        rows,
        dist,
        base_t,
        torch.as_tensor(goal.pose.position, dtype=DT).view(1, 3),
        torch.as_tensor(goal.pose.rotation.matrix, dtype=DT).view(1, 3, 3),
        torch.as_tensor([tol]),
        w,
        config.ik_max_steps,
        config.dls_damping,
    )
    return q_best[0].numpy()


def multi_start_ik(
    scene: Scene,
    robot: RobotModel,
    config: SolverConfig,
    rng: np.random.Generator,
    w: LossWeights,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Refine ik_starts_per_goal random initializations for every goal.

    Returns the best joint vector per goal as an (n, m) matrix plus all
    refined alternates per goal, ordered best-first.
    """
    m = len(scene.goals)
    starts = config.ik_starts_per_goal
    n = robot.n
    q0 = rng.uniform(-math.pi, math.pi, size=(m, starts, n))
    b = m * starts
    prox, rows, dist = _robot_batch_tensors(robot, b)
    base_t = torch.as_tensor(scene.base_pose.matrix(), dtype=DT)
    goal_pos = torch.as_tensor(
        np.repeat(np.stack([g.pose.position for g in scene.goals]), starts, axis=0), dtype=DT
    )
    goal_rot = torch.as_tensor(
        np.repeat(np.stack([g.pose.rotation.matrix for g in scene.goals]), starts, axis=0),
        dtype=DT,
    )
    tol_map = {"full_pose": 0, "rot_symmetric": 1, "position_only": 2}
    tol = torch.as_tensor(
        np.repeat([tol_map[g.tolerance.value] for g in scene.goals], starts)
    )
    q_best, _, _, err_best = dls_refine_batch(
        torch.as_tensor(q0.reshape(b, n), dtype=DT),
        prox,
        rows,
        dist,
        base_t,
        goal_pos,
        goal_rot,
        tol,
        w,
        config.ik_max_steps,
        config.dls_damping,
    )
    q_best = q_best.numpy().reshape(m, starts, n)
    # rank starts per goal by their unclipped weighted pose distance
    metric = err_best.numpy().reshape(m, starts)
    best_q = np.zeros((n, m))
    alternates: list[np.ndarray] = []
    for g in range(m):
        order = np.argsort(metric[g], kind="stable")
        alternates.append(q_best[g][order])
        best_q[:, g] = q_best[g][order[0]]
    return best_q, alternates


# ---------------------------------------------------------------------------
# Adam co-optimization
# ---------------------------------------------------------------------------


def adam_ik_batch(
    ctx,
    q0: torch.Tensor,  # (A, m, n)
    w: LossWeights,
    steps: int,
    lr: float,
) -> torch.Tensor:
    """Joint-angle-only Adam refinement for a batch of fixed designs.

    With the morphology frozen the per-goal loss terms are independent, so
    the best-seen iterate is tracked per goal. Returns wrapped angles.
    """
    xy = torch.stack([torch.sin(q0), torch.cos(q0)], dim=-1).requires_grad_(True)
    opt = torch.optim.Adam([xy], lr=lr, betas=(0.9, 0.999), eps=1e-8)
    q_best = q0.clone()
    best = torch.full(q0.shape[:2], math.inf, dtype=DT)
    for _ in range(steps):
        opt.zero_grad()
        q = torch.atan2(xy[..., 0], xy[..., 1])
        terms = eval_losses_t(ctx, q, None, w, clipped=True, want_per_goal=True)
        per_goal = (
            w.w_d * terms["distance_per_goal"] + w.w_col * terms["collision_per_goal"]
        )
        with torch.no_grad():
            better = per_goal < best
            if bool(better.any()):
                best = torch.where(better, per_goal.detach(), best)
                q_best = torch.where(better.unsqueeze(-1), q.detach(), q_best)
        loss = per_goal.sum()
        if not torch.isfinite(loss):
            break
        loss.backward()
        opt.step()
    return q_best


def _realized_breakdown(
    scene: Scene,
    params: DesignParams,
    Q: np.ndarray,
    w: LossWeights,
    catalog: ModuleCatalog | None,
) -> LossBreakdown:
    robot = build_robot(params, catalog)
    ctx = build_context(scene, robot)
    q_t = torch.as_tensor(Q.T, dtype=DT).unsqueeze(0)
    with torch.no_grad():
        terms = eval_losses_t(ctx, q_t, None, w, clipped=True)
    return combine_terms(
        float(terms["distance"]), float(terms["collision"]), float(terms["hardware"]), 0.0, w
    )


def co_optimize(
    scene: Scene,
    params: DesignParams,
    Q: np.ndarray,
    config: SolverConfig | None = None,
    w: LossWeights | None = None,
    catalog: ModuleCatalog | None = None,
    rng: np.random.Generator | None = None,
    progress: ProgressFn | None = None,
) -> tuple[DesignParams, np.ndarray, LossBreakdown]:
    """Warm-started Adam refinement of joint angles and continuous parameters.

    Joint angles are parameterized as (x, y) pairs through atan2; free-mode
    rows go through the logistic squashing, economic rows through the
    annealed Gumbel-softmax relaxation, and modular designs optimize joint
    angles only. Never returns a point worse than the input (the input is
    returned when optimization fails to improve the benchmark loss).
    """
    config = config or SolverConfig()
    w = w or LossWeights()
    rng = rng or np.random.default_rng(config.rng_seed)
    Q = np.asarray(Q, dtype=float)
    robot = build_robot(params, catalog)
    n, m = robot.n, len(scene.goals)
    if Q.shape != (n, m):
        raise ValueError(f"Q must be ({n}, {m}), got {Q.shape}")

    bd0 = _realized_breakdown(scene, params, Q, w, catalog)
    bench0 = benchmark_loss(bd0, w)
    ctx = build_context(scene, robot)

    if params.mode is DesignMode.MODULAR:
        # morphology is frozen: per-goal losses factorize, so refine joint
        # angles with per-goal best tracking
        q_t = torch.as_tensor(Q.T, dtype=DT).unsqueeze(0)
        q_opt = adam_ik_batch(ctx, q_t, w, config.adam_steps, config.lr_ik)
        q_out = wrap_angles(q_opt[0].numpy().T)
        bd = _realized_breakdown(scene, params, q_out, w, catalog)
        if benchmark_loss(bd, w) <= bench0:
            return params, q_out, bd
        return params, Q, bd0

    def attempt(q_init: np.ndarray) -> tuple[DesignParams, np.ndarray] | None:
        xy = torch.stack(
            [
                torch.as_tensor(np.sin(q_init.T), dtype=DT),
                torch.as_tensor(np.cos(q_init.T), dtype=DT),
            ],
            dim=-1,
        ).requires_grad_(True)  # (m, n, 2)
        theta_vars: list[torch.Tensor] = []
        mode = params.mode
        if mode is DesignMode.FREE:
            lo = torch.as_tensor([0.0, -FREE_A_MAX, -math.pi], dtype=DT)
            hi = torch.as_tensor([FREE_D_MAX, FREE_A_MAX, math.pi], dtype=DT)
            raw = torch.as_tensor(
                unsquash_free(params.rows, lo.numpy(), hi.numpy()), dtype=DT
            ).requires_grad_(True)
            theta_vars = [raw]
        elif mode is DesignMode.ECONOMIC:
            state = econ_logits_from_rows(params.rows)
            tv = {
                k: torch.as_tensor(v, dtype=DT).requires_grad_(True) for k, v in state.items()
            }
            theta_vars = list(tv.values())

        groups = [{"params": [xy], "lr": config.lr_ik}]
        if theta_vars:
            groups.append({"params": theta_vars, "lr": config.lr_params})
        opt = torch.optim.Adam(groups, betas=(0.9, 0.999), eps=1e-8)
        # cosine decay to settle the terminal oscillation well below the
        # millimeter scale; the table rates are the initial values
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(
            opt, T_max=config.adam_steps, eta_min=0.002 * config.lr_ik
        )

        def rows_from_vars(tau: float, hard: bool):
            if mode is DesignMode.FREE:
                return squash_free(theta_vars[0], 0.0, 1.0) * (hi - lo) + lo
            if mode is DesignMode.ECONOMIC:
                noise_d = torch.as_tensor(gumbel_noise((n, 2), rng), dtype=DT)
                noise_a = torch.as_tensor(gumbel_noise((n, 3), rng), dtype=DT)
                noise_al = torch.as_tensor(gumbel_noise((n, 3), rng), dtype=DT)
                w_d = gumbel_softmax_t(tv["logits_d"], tau, noise_d, hard)
                w_a = gumbel_softmax_t(tv["logits_a"], tau, noise_a, hard)
                w_al = gumbel_softmax_t(tv["logits_alpha"], tau, noise_al, hard)
                bd_ = branch_value(tv["raw_d"])
                ba_ = branch_value(tv["raw_a"])
                zero = torch.zeros_like(bd_)
                d = (w_d * torch.stack([zero, bd_], -1)).sum(-1)
                a = (w_a * torch.stack([zero, -ba_, ba_], -1)).sum(-1)
                alphas = torch.stack(
                    [torch.full_like(bd_, c) for c in ECON_ALPHAS], -1
                )
                al = (w_al * alphas).sum(-1)
                return torch.stack([d, a, al], -1)
            return None

        best = {"loss": math.inf, "xy": None, "rows": None}
        for step in range(config.adam_steps):
            opt.zero_grad()
            tau = temperature(step, config.adam_steps)
            rows_t = rows_from_vars(tau, hard=False)
            q_t = torch.atan2(xy[..., 0], xy[..., 1]).unsqueeze(0)
            rt = None if rows_t is None else rows_t.unsqueeze(0)
            terms = eval_losses_t(ctx, q_t, rt, w, clipped=True)
            loss = (
                w.w_d * terms["distance"]
                + w.w_col * terms["collision"]
                + w.w_hw * terms["hardware"]
            ).squeeze(0)
            if not torch.isfinite(loss):
                return None
            val = float(loss.detach())
            if val < best["loss"] and mode is not DesignMode.ECONOMIC:
                best.update(
                    loss=val,
                    xy=xy.detach().clone(),
                    rows=None if rows_t is None else rows_t.detach().clone(),
                )
            loss.backward()
            opt.step()
            sched.step()
            if progress is not None and step % 25 == 0:
                progress({"stage": "co_optimize", "step": step, "loss": val})

        # final iterate (economic: a hard draw at the terminal temperature)
        with torch.no_grad():
            rows_fin = rows_from_vars(TEMP_END, hard=True)
            q_fin = torch.atan2(xy[..., 0], xy[..., 1])
        cands = [(q_fin.numpy().T, None if rows_fin is None else rows_fin.numpy())]
        if best["xy"] is not None:
            with torch.no_grad():
                qb = torch.atan2(best["xy"][..., 0], best["xy"][..., 1]).numpy().T
            cands.append((qb, None if best["rows"] is None else best["rows"].numpy()))

        results = []
        for q_np, rows_np in cands:
            if mode is DesignMode.MODULAR:
                p_out = params
            else:
                p_out = DesignParams(mode, rows=np.asarray(rows_np))
            results.append((p_out, wrap_angles(q_np)))
        return results

    results = attempt(Q)
    if results is None:
        # one perturb-restart on a non-finite evaluation
        q_perturbed = wrap_angles(Q + rng.normal(scale=1e-3, size=Q.shape))
        results = attempt(q_perturbed)
        if results is None:
            raise NonFinite("co-optimization produced non-finite losses twice")

    best_params, best_q, best_bd, best_bench = params, Q, bd0, bench0
    for p_out, q_out in results:
        bd = _realized_breakdown(scene, p_out, q_out, w, catalog)
        bench = benchmark_loss(bd, w)
        if bench < best_bench:
            best_params, best_q, best_bd, best_bench = p_out, q_out, bd, bench
    return best_params, best_q, best_bd


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def _reselect_alternates(
    scene: Scene,
    params: DesignParams,
    Q: np.ndarray,
    alternates: list[np.ndarray],
    w: LossWeights,
    catalog: ModuleCatalog | None,
    config: SolverConfig | None = None,
) -> np.ndarray:
    """Per-goal, pick the best of the co-optimized vector and the alternates.

    Alternates were refined under the seed morphology, so every option is
    first re-refined under the final one; both raw and polished variants
    compete, as do the other goals' solutions (cheap extra basins for goals
    whose own starts all failed). Distance and collision factorize over
    goals, so per-goal argmin equals the global argmin.
    """
    config = config or SolverConfig()
    robot = build_robot(params, catalog)
    m = len(scene.goals)
    n = robot.n
    max_alt = max(len(a) for a in alternates)
    n_opt = max_alt + 1 + (m - 1)
    q_options = np.repeat(Q.T[None, :, :], n_opt, axis=0)  # (O, m, n)
    valid = np.zeros((n_opt, m), dtype=bool)
    valid[0] = True
    for g, alts in enumerate(alternates):
        for o, alt in enumerate(alts):
            q_options[o + 1, g] = alt
            valid[o + 1, g] = True
    for shift in range(1, m):  # cross-goal warm starts
        for g in range(m):
            q_options[max_alt + shift, g] = Q[:, (g + shift) % m]
            valid[max_alt + shift, g] = True

    # polish every option under the final morphology
    b = n_opt * m
    prox, rows, dist = _robot_batch_tensors(robot, b)
    goal_pos = np.stack([g.pose.position for g in scene.goals])
    goal_rot = np.stack([g.pose.rotation.matrix for g in scene.goals])
    tol_map = {"full_pose": 0, "rot_symmetric": 1, "position_only": 2}
    tol = np.array([tol_map[g.tolerance.value] for g in scene.goals], dtype=np.int64)
    polished, _, _, _ = dls_refine_batch(
        torch.as_tensor(q_options.reshape(b, n), dtype=DT),
        prox,
        rows,
        dist,
        torch.as_tensor(scene.base_pose.matrix(), dtype=DT),
        torch.as_tensor(np.tile(goal_pos, (n_opt, 1)), dtype=DT),
        torch.as_tensor(np.tile(goal_rot, (n_opt, 1, 1)), dtype=DT),
        torch.as_tensor(np.tile(tol, n_opt)),
        w,
        config.ik_max_steps // 2,
        config.dls_damping,
    )
    all_options = np.concatenate([q_options, polished.numpy().reshape(n_opt, m, n)], axis=0)
    all_valid = np.concatenate([valid, valid], axis=0)

    ctx_b = build_context(scene, [robot] * (2 * n_opt))
    with torch.no_grad():
        terms = eval_losses_t(
            ctx_b,
            torch.as_tensor(all_options, dtype=DT),
            None,
            w,
            clipped=True,
            want_per_goal=True,
        )
        per_goal = (
            w.w_d * terms["distance_per_goal"] + w.w_col * terms["collision_per_goal"]
        ).numpy()
    per_goal[~all_valid] = np.inf
    choice = per_goal.argmin(axis=0)
    q_out = Q.copy()
    for g in range(m):
        q_out[:, g] = all_options[choice[g], g]
    return q_out


def design_task(
    scene: Scene,
    mode: DesignMode,
    dof: int,
    config: SolverConfig | None = None,
    w: LossWeights | None = None,
    catalog: ModuleCatalog | None = None,
    progress: ProgressFn | None = None,
    should_cancel: CancelFn | None = None,
    reach_cap_factor: float | None = None,
) -> list[Candidate]:
    """Seed, solve IK, co-optimize, and rank a set of candidate designs."""
    config = config or SolverConfig()
    w = w or LossWeights()
    if mode is DesignMode.MODULAR and catalog is None:
        catalog = default_catalog()

    master = np.random.SeedSequence(config.rng_seed)
    children = master.spawn(config.n_candidates + 1)
    seed_rng = np.random.default_rng(children[0])
    seeds = seed_candidates(
        scene, mode, dof, config.n_candidates, seed_rng, catalog, w=w,
        reach_cap_factor=reach_cap_factor,
    )

    def check_cancel():
        if should_cancel is not None and should_cancel():
            raise JobCancelled("cancelled at stage boundary")

    def emit(event: dict):
        if progress is not None:
            progress(event)

    candidates: list[Candidate] = []
    for ci, params in enumerate(seeds):
        check_cancel()
        emit({"stage": "ik", "candidate": ci, "total": len(seeds)})
        cand_streams = children[ci + 1].spawn(2)
        ik_rng = np.random.default_rng(cand_streams[0])
        co_rng = np.random.default_rng(cand_streams[1])
        robot = build_robot(params, catalog)
        q0, alternates = multi_start_ik(scene, robot, config, ik_rng, w)
        check_cancel()
        emit({"stage": "co_optimize", "candidate": ci, "total": len(seeds)})
        params_opt, q_opt, _ = co_optimize(
            scene, params, q0, config, w, catalog, co_rng,
            progress=(lambda ev, ci=ci: emit({**ev, "candidate": ci})) if progress else None,
        )
        check_cancel()
        q_final = _reselect_alternates(scene, params_opt, q_opt, alternates, w, catalog, config)
        bd = _realized_breakdown(scene, params_opt, q_final, w, catalog)
        bench = benchmark_loss(bd, w)
        robot_fin = build_robot(params_opt, catalog)
        solved = 0
        for g, goal in enumerate(scene.goals):
            _, ee = forward_kinematics(robot_fin, q_final[:, g], base=scene.base_pose)
            if solved_check(goal, ee):
                solved += 1
        candidates.append(
            Candidate(
                params=params_opt,
                ik=IKSet(q_final, alternates),
                loss=bd,
                bench=bench,
                score=None,
                solved_goals=solved,
                provenance={
                    "seed": int(config.rng_seed),
                    "candidate_index": ci,
                    "stages": ["seed", "multi_start_ik", "co_optimize", "reselect"],
                },
            )
        )
        emit({"stage": "candidate_done", "candidate": ci, "total": len(seeds), "best_loss": min(c.bench for c in candidates)})

    order = sorted(range(len(candidates)), key=lambda i: (candidates[i].bench, i))
    ranked = [candidates[i] for i in order]
    emit({"stage": "done", "total": len(seeds)})
    return ranked

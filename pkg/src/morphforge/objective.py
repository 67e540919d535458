"""The full task objective: pose distance with tolerances, collision cost,
hardware cost, diversity regularizers, and benchmark scoring.

The batched torch core evaluates a design batch (possibly with heterogeneous
link-capsule structure, handled by padding) against all goals at once; thin
numpy wrappers expose the per-term functions. Angles enter the rotational
distance in degrees (the weight tables are stated per degree); everything
else is radians and meters.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import torch

from .errors import ZeroVector
from .geometry import (
    DT,
    Pose,
    angle_from_trace_t,
    capsule_capsule_sd_t,
    clipped_excess_angle_t,
)
from .kinematics import (
    DesignMode,
    DesignParams,
    ModuleCatalog,
    RobotModel,
    _CAP_A,
    _CAP_CONST,
    _CAP_D,
    build_robot,
    fk_frames_t,
)
from .scene import Goal, Scene, ToleranceMode, scene_obstacle_spheres

RAD2DEG = 180.0 / math.pi

SOLVED_POS_TOL = 1e-3  # 1 mm
SOLVED_ROT_TOL = math.radians(1.0)  # 1 deg

_TOL_CODE = {
    ToleranceMode.FULL_POSE: 0,
    ToleranceMode.ROT_SYMMETRIC: 1,
    ToleranceMode.POSITION_ONLY: 2,
}

_KIND_CODE = {_CAP_D: 0, _CAP_A: 1, _CAP_CONST: 3}


@dataclass
class LossWeights:
    """Objective weights; defaults follow the published experiment table."""

    w_d: float = 5.0
    w_r_rot: float = 0.5
    w_col: float = 0.6
    w_ik_div: float = 0.4
    w_same_env: float = 0.5
    w_cross_env: float = 2.0
    w_reg: float = 1.0
    w_hw: float = 0.1
    collision_threshold: float = 0.12
    clip_deg: float = 0.2
    # The printed similarity formula grows with dissimilarity while its text
    # penalizes similarity; by default diversity enters as a reward (negative
    # term). Set literal_similarity_sign for the as-printed behavior.
    literal_similarity_sign: bool = False
    include_hardware_in_benchmark: bool = True

    def __post_init__(self):
        for f in fields(self):
            if f.type == "float" and getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be nonnegative")
        if self.collision_threshold <= 0:
            raise ValueError("collision_threshold must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "LossWeights":
        known = {f.name for f in fields(LossWeights)}
        return LossWeights(**{k: v for k, v in doc.items() if k in known})


@dataclass
class LossBreakdown:
    """Unweighted term sums; total is their weighted combination."""

    distance: float
    collision: float
    hardware: float
    regularization: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


def combine_terms(
    distance: float,
    collision: float,
    hardware: float,
    regularization: float,
    w: LossWeights,
) -> LossBreakdown:
    total = (
        w.w_d * distance
        + w.w_col * collision
        + w.w_hw * hardware
        + w.w_reg * regularization
    )
    return LossBreakdown(distance, collision, hardware, regularization, total)


def benchmark_loss(bd: LossBreakdown, w: LossWeights) -> float:
    """Task-quality loss used for ranking and normalized scores.

    Diversity regularizers compare candidates, not task quality, so they are
    excluded; hardware inclusion is controlled by the weights flag.
    """
    loss = w.w_d * bd.distance + w.w_col * bd.collision
    if w.include_hardware_in_benchmark:
        loss += w.w_hw * bd.hardware
    return loss


# ---------------------------------------------------------------------------
# batched evaluation context
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TaskContext:
    """Padded constant tensors for evaluating a batch of designs on one scene."""

    n: int
    m: int
    batch: int
    has_rows: bool
    prox: torch.Tensor  # (A, n, 4, 4)
    dist_const: torch.Tensor | None  # (A, n, 4, 4) for constant-link modes
    rows_struct: torch.Tensor  # (A, n, 3) realized rows (zeros for modular)
    cap_body: torch.Tensor  # (A, S) long
    cap_kind: torch.Tensor  # (A, S) long
    cap_const_a: torch.Tensor  # (A, S, 3)
    cap_const_b: torch.Tensor  # (A, S, 3)
    cap_radius: torch.Tensor  # (A, S)
    cap_valid: torch.Tensor  # (A, S) bool
    pair_idx: torch.Tensor  # (A, P, 2) long
    pair_valid: torch.Tensor  # (A, P) bool
    goal_pos: torch.Tensor  # (m, 3)
    goal_rot: torch.Tensor  # (m, 3, 3)
    tol_code: torch.Tensor  # (m,) long
    obstacles: torch.Tensor  # (K, 4)
    base: torch.Tensor  # (4, 4)
    hardware_const: torch.Tensor  # (A,) catalog costs for modular, zeros otherwise


def build_context(
    scene: Scene,
    robots: list[RobotModel] | RobotModel,
    goals_per_design: list[list[Goal]] | None = None,
) -> TaskContext:
    """Padded tensors for a design batch on one scene.

    ``goals_per_design`` replaces the scene's goals with one goal list per
    design (all the same length), for batches where every design chases its
    own targets; obstacles and base still come from the scene.
    """
    if isinstance(robots, RobotModel):
        robots = [robots]
    a = len(robots)
    n = robots[0].n
    if any(r.n != n for r in robots):
        raise ValueError("all robots in a batch must share the joint count")
    s_max = max(r.shape_count for r in robots)
    p_max = max(len(r.collision_pairs) for r in robots)

    prox = np.stack([r.proximal for r in robots])
    dist = np.stack([r.distal for r in robots])
    rows_struct = np.zeros((a, n, 3))
    cap_body = np.zeros((a, s_max), dtype=np.int64)
    cap_kind = np.full((a, s_max), 2, dtype=np.int64)  # 2 = point (inert default)
    cap_const_a = np.zeros((a, s_max, 3))
    cap_const_b = np.zeros((a, s_max, 3))
    cap_radius = np.zeros((a, s_max))
    cap_valid = np.zeros((a, s_max), dtype=bool)
    pair_idx = np.zeros((a, max(p_max, 1), 2), dtype=np.int64)
    pair_valid = np.zeros((a, max(p_max, 1)), dtype=bool)
    hardware_const = np.zeros(a)

    has_rows = robots[0].rows is not None
    for ai, r in enumerate(robots):
        if (r.rows is not None) != has_rows:
            raise ValueError("cannot mix parameterized and modular robots in a batch")
        if r.rows is not None:
            rows_struct[ai] = r.rows
        else:
            hardware_const[ai] = r.unit_cost
        for si, spec in enumerate(r.capsule_specs):
            cap_body[ai, si] = spec.body
            cap_kind[ai, si] = _KIND_CODE.get(spec.kind, 2)
            cap_const_a[ai, si] = spec.a_local
            cap_const_b[ai, si] = spec.b_local
            cap_radius[ai, si] = spec.radius
            cap_valid[ai, si] = True
        for pi, (i, j) in enumerate(r.collision_pairs):
            pair_idx[ai, pi] = (i, j)
            pair_valid[ai, pi] = True

    if goals_per_design is None:
        goals = scene.goals
        goal_pos = np.stack([g.pose.position for g in goals])
        goal_rot = np.stack([g.pose.rotation.matrix for g in goals])
        tol = np.array([_TOL_CODE[g.tolerance] for g in goals], dtype=np.int64)
        m = len(goals)
    else:
        if len(goals_per_design) != a:
            raise ValueError("need one goal list per design")
        m = len(goals_per_design[0])
        if any(len(gl) != m for gl in goals_per_design):
            raise ValueError("every design needs the same number of goals")
        goal_pos = np.stack(
            [[g.pose.position for g in gl] for gl in goals_per_design]
        )  # (A, m, 3)
        goal_rot = np.stack(
            [[g.pose.rotation.matrix for g in gl] for gl in goals_per_design]
        )
        tol = np.array(
            [[_TOL_CODE[g.tolerance] for g in gl] for gl in goals_per_design],
            dtype=np.int64,
        )

    return TaskContext(
        n=n,
        m=m,
        batch=a,
        has_rows=has_rows,
        prox=torch.as_tensor(prox, dtype=DT),
        dist_const=None if has_rows else torch.as_tensor(dist, dtype=DT),
        rows_struct=torch.as_tensor(rows_struct, dtype=DT),
        cap_body=torch.as_tensor(cap_body),
        cap_kind=torch.as_tensor(cap_kind),
        cap_const_a=torch.as_tensor(cap_const_a, dtype=DT),
        cap_const_b=torch.as_tensor(cap_const_b, dtype=DT),
        cap_radius=torch.as_tensor(cap_radius, dtype=DT),
        cap_valid=torch.as_tensor(cap_valid),
        pair_idx=torch.as_tensor(pair_idx),
        pair_valid=torch.as_tensor(pair_valid),
        goal_pos=torch.as_tensor(goal_pos, dtype=DT),
        goal_rot=torch.as_tensor(goal_rot, dtype=DT),
        tol_code=torch.as_tensor(tol),
        obstacles=torch.as_tensor(scene_obstacle_spheres(scene), dtype=DT),
        base=torch.as_tensor(scene.base_pose.matrix(), dtype=DT),
        hardware_const=torch.as_tensor(hardware_const, dtype=DT),
    )


def fk_batch(ctx: TaskContext, q: torch.Tensor, rows: torch.Tensor | None = None):
    """FK for q of shape (A, m, n) with optional differentiable rows (A, n, 3)."""
    a, m, n = q.shape
    prox = ctx.prox.unsqueeze(1).expand(a, m, n, 4, 4)
    if ctx.has_rows:
        r = ctx.rows_struct if rows is None else rows
        r = r.unsqueeze(1).expand(a, m, n, 3)
        return fk_frames_t(q, prox, rows=r, base=ctx.base)
    dist = ctx.dist_const.unsqueeze(1).expand(a, m, n, 4, 4)
    return fk_frames_t(q, prox, dist_const=dist, base=ctx.base)


def world_capsules(ctx: TaskContext, body_frames: torch.Tensor, rows: torch.Tensor | None):
    """World-frame capsule endpoints (A, m, S, 3) x2 for each configuration."""
    a, m = body_frames.shape[0], body_frames.shape[1]
    s = ctx.cap_body.shape[1]
    if ctx.has_rows:
        r = ctx.rows_struct if rows is None else rows
        d_vals = torch.gather(r[..., 0], 1, ctx.cap_body)  # (A, S)
        a_vals = torch.gather(r[..., 1], 1, ctx.cap_body)
        zero = torch.zeros_like(d_vals)
        is_d = ctx.cap_kind == 0
        is_a = ctx.cap_kind == 1
        # local a endpoint: (0,0,d) for a-kind capsules, else origin
        a_loc = torch.stack([zero, zero, torch.where(is_a, d_vals, zero)], dim=-1)
        # local b endpoint: (0,0,d) for d-kind, (a,0,d) for a-kind, origin for points
        b_x = torch.where(is_a, a_vals, zero)
        b_z = torch.where(is_d | is_a, d_vals, zero)
        b_loc = torch.stack([b_x, zero, b_z], dim=-1)
        is_const = (ctx.cap_kind == 3).unsqueeze(-1)
        a_loc = torch.where(is_const, ctx.cap_const_a, a_loc)
        b_loc = torch.where(is_const, ctx.cap_const_b, b_loc)
    else:
        a_loc = ctx.cap_const_a
        b_loc = ctx.cap_const_b
    # gather each capsule's body frame: (A, m, S, 4, 4)
    body_idx = ctx.cap_body.view(a, 1, s, 1, 1).expand(a, m, s, 4, 4)
    frames = torch.gather(body_frames, 2, body_idx)
    rot = frames[..., :3, :3]
    trans = frames[..., :3, 3]
    a_loc_b = a_loc.view(a, 1, s, 3).expand(a, m, s, 3)
    b_loc_b = b_loc.view(a, 1, s, 3).expand(a, m, s, 3)
    pa = (rot @ a_loc_b.unsqueeze(-1)).squeeze(-1) + trans
    pb = (rot @ b_loc_b.unsqueeze(-1)).squeeze(-1) + trans
    return pa, pb


def collision_pair_loss_t(sd: torch.Tensor, t: float) -> torch.Tensor:
    """Exponential pairwise penalty, 1 at contact, 0 at and above threshold."""
    scale = 1.0 / (1.0 - math.exp(-1.0))
    arg = torch.clamp(-sd / t, max=50.0)
    val = scale * (torch.exp(arg) - math.exp(-1.0))
    return torch.where(sd <= t, val, torch.zeros_like(val))


def collision_terms_t(
    ctx: TaskContext,
    body_frames: torch.Tensor,
    rows: torch.Tensor | None,
    threshold: float,
) -> torch.Tensor:
    """Per-configuration summed pair loss, shape (A, m)."""
    a, m = body_frames.shape[0], body_frames.shape[1]
    pa, pb = world_capsules(ctx, body_frames, rows)
    radius = ctx.cap_radius.view(a, 1, -1).expand(a, m, -1)
    total = torch.zeros((a, m), dtype=DT)

    p = ctx.pair_idx.shape[1]
    if bool(ctx.pair_valid.any()):
        idx_i = ctx.pair_idx[..., 0].view(a, 1, p, 1).expand(a, m, p, 3)
        idx_j = ctx.pair_idx[..., 1].view(a, 1, p, 1).expand(a, m, p, 3)
        pa_i = torch.gather(pa, 2, idx_i)
        pb_i = torch.gather(pb, 2, idx_i)
        pa_j = torch.gather(pa, 2, idx_j)
        pb_j = torch.gather(pb, 2, idx_j)
        r_i = torch.gather(radius, 2, ctx.pair_idx[..., 0].view(a, 1, p).expand(a, m, p))
        r_j = torch.gather(radius, 2, ctx.pair_idx[..., 1].view(a, 1, p).expand(a, m, p))
        sd = capsule_capsule_sd_t(pa_i, pb_i, r_i, pa_j, pb_j, r_j)
        loss = collision_pair_loss_t(sd, threshold)
        loss = torch.where(ctx.pair_valid.view(a, 1, p), loss, torch.zeros_like(loss))
        total = total + loss.sum(-1)

    k = ctx.obstacles.shape[0]
    if k > 0:
        obs_c = ctx.obstacles[:, :3].view(1, 1, 1, k, 3)
        obs_r = ctx.obstacles[:, 3].view(1, 1, 1, k)
        sd = capsule_capsule_sd_t(
            pa.unsqueeze(3),
            pb.unsqueeze(3),
            radius.unsqueeze(3),
            obs_c,
            obs_c,
            obs_r,
        )
        loss = collision_pair_loss_t(sd, threshold)
        loss = torch.where(
            ctx.cap_valid.view(a, 1, -1, 1), loss, torch.zeros_like(loss)
        )
        total = total + loss.sum((-1, -2))
    return total


def distance_terms_t(
    ctx: TaskContext,
    ee: torch.Tensor,
    w: LossWeights,
    clipped: bool,
) -> torch.Tensor:
    """Per-goal weighted pose distance, shape (A, m)."""
    ee_pos = ee[..., :3, 3]
    ee_rot = ee[..., :3, :3]
    pos_err = torch.sqrt(
        torch.clamp(((ctx.goal_pos - ee_pos) ** 2).sum(-1), min=1e-300)
    )
    r_rel = ctx.goal_rot.transpose(-1, -2) @ ee_rot
    tr = r_rel.diagonal(dim1=-2, dim2=-1).sum(-1)
    if clipped:
        full_slot = clipped_excess_angle_t(tr, w.clip_deg) * RAD2DEG
    else:
        full_slot = angle_from_trace_t(tr) * RAD2DEG
    sym_slot = (1.0 - r_rel[..., 2, 2]) / 2.0
    zero = torch.zeros_like(full_slot)
    rot_slot = torch.where(
        ctx.tol_code == 0,
        full_slot,
        torch.where(ctx.tol_code == 1, sym_slot, zero),
    )
    return pos_err + w.w_r_rot * rot_slot


def hardware_term_t(ctx: TaskContext, rows: torch.Tensor | None) -> torch.Tensor:
    """Per-design hardware cost, shape (A,)."""
    if ctx.has_rows:
        r = ctx.rows_struct if rows is None else rows
        return r[..., 1].abs().sum(-1) + r[..., 0].sum(-1)
    return ctx.hardware_const


def eval_losses_t(
    ctx: TaskContext,
    q: torch.Tensor,
    rows: torch.Tensor | None,
    w: LossWeights,
    clipped: bool = True,
    want_per_goal: bool = False,
):
    """Distance/collision/hardware sums over goals for a design batch.

    q: (A, m, n); rows: (A, n, 3) or None. Returns dict of (A,) tensors, plus
    per-goal (A, m) terms when requested.
    """
    _, body_frames, frames = fk_batch(ctx, q, rows)
    ee = frames[..., -1, :, :]
    dist_pg = distance_terms_t(ctx, ee, w, clipped)
    col_pg = collision_terms_t(ctx, body_frames, rows, w.collision_threshold)
    out = {
        "distance": dist_pg.sum(-1),
        "collision": col_pg.sum(-1),
        "hardware": hardware_term_t(ctx, rows),
    }
    if want_per_goal:
        out["distance_per_goal"] = dist_pg
        out["collision_per_goal"] = col_pg
    return out


# ---------------------------------------------------------------------------
# scalar API
# ---------------------------------------------------------------------------


def pose_distance(goal: Goal, ee: Pose, w: LossWeights, clipped: bool = False) -> float:
    """Weighted distance between a goal and an achieved end-effector pose."""
    pos_err = float(np.linalg.norm(goal.pose.position - ee.position))
    r_rel = goal.pose.rotation.matrix.T @ ee.rotation.matrix
    tr = torch.as_tensor(float(np.trace(r_rel)), dtype=DT)
    if goal.tolerance is ToleranceMode.POSITION_ONLY:
        return pos_err
    if goal.tolerance is ToleranceMode.ROT_SYMMETRIC:
        return pos_err + w.w_r_rot * float((1.0 - r_rel[2, 2]) / 2.0)
    if clipped:
        ang = float(clipped_excess_angle_t(tr, w.clip_deg))
    else:
        ang = float(angle_from_trace_t(tr))
    return pos_err + w.w_r_rot * ang * RAD2DEG


def collision_pair_loss(sd: float, t: float) -> float:
    if t <= 0:
        raise ValueError("threshold must be positive")
    if sd > t:
        return 0.0
    return (math.exp(-sd / t) - math.exp(-1.0)) / (1.0 - math.exp(-1.0))


def collision_cost(
    scene: Scene, robot: RobotModel, q: np.ndarray, w: LossWeights | None = None
) -> float:
    """Summed pair loss over self pairs and robot/obstacle-sphere pairs."""
    w = w or LossWeights()
    ctx = build_context(scene, robot)
    q_t = torch.as_tensor(np.asarray(q, dtype=float), dtype=DT).view(1, 1, -1)
    with torch.no_grad():
        _, body_frames, _ = fk_batch(ctx, q_t.expand(1, 1, robot.n))
        col = collision_terms_t(ctx, body_frames, None, w.collision_threshold)
    return float(col[0, 0])


def hardware_cost(params: DesignParams, catalog: ModuleCatalog | None = None) -> float:
    """Total link material: sum of |a| and d, or catalog unit costs."""
    if params.mode is DesignMode.MODULAR:
        if catalog is None:
            raise ValueError("modular hardware cost requires a catalog")
        return float(sum(catalog.choices[s].cost for s in params.slots))
    rows = params.rows
    return float(np.sum(np.abs(rows[:, 1])) + np.sum(rows[:, 0]))


def _param_vector(p: DesignParams, n_choices: int) -> np.ndarray:
    if p.mode is DesignMode.MODULAR:
        vec = np.zeros(len(p.slots) * n_choices)
        for i, s in enumerate(p.slots):
            vec[i * n_choices + s] = 1.0
        return vec
    return p.rows.reshape(-1)


def design_diversity(
    params_batch: list[list[DesignParams]],
    w: LossWeights | None = None,
    n_choices: int = 5,
) -> float:
    """Similarity regularizer over designs grouped by environment.

    Returns the negated weighted mean pairwise L1 distance (within-environment
    and cross-environment), so that minimizing the total loss spreads designs
    apart; the literal (positive) sign is available via the weights flag.
    """
    w = w or LossWeights()
    b = len(params_batch)
    if b == 0:
        return 0.0
    r = len(params_batch[0])
    if any(len(env) != r for env in params_batch):
        raise ValueError("every environment needs the same number of designs")
    vecs = [[_param_vector(p, n_choices) for p in env] for env in params_batch]
    value = 0.0
    if r >= 2:
        within = 0.0
        for env in vecs:
            for i in range(r - 1):
                for j in range(i + 1, r):
                    within += float(np.abs(env[i] - env[j]).sum())
        value += 2.0 * w.w_same_env / (b * r * (r - 1)) * within
    if b >= 2:
        cross = 0.0
        for e in range(b - 1):
            for f in range(e + 1, b):
                for i in range(r):
                    for j in range(r):
                        cross += float(np.abs(vecs[e][i] - vecs[f][j]).sum())
        value += 2.0 * w.w_cross_env / (b * (b - 1) * r * r) * cross
    return value if w.literal_similarity_sign else -value


def ik_diversity(
    q_candidates: list[list[np.ndarray]],
    w: LossWeights | None = None,
) -> float:
    """Mean pairwise cosine similarity of per-goal IK candidates (penalty)."""
    w = w or LossWeights()
    if not q_candidates:
        return 0.0
    counts = {len(goal) for goal in q_candidates}
    if len(counts) != 1:
        raise ValueError("every goal needs the same number of IK candidates")
    n_heads = counts.pop()
    if n_heads < 2:
        return 0.0
    m = len(q_candidates)
    total = 0.0
    for goal in q_candidates:
        for h in range(n_heads - 1):
            for k in range(h + 1, n_heads):
                qa = np.asarray(goal[h], dtype=float)
                qb = np.asarray(goal[k], dtype=float)
                na, nb = np.linalg.norm(qa), np.linalg.norm(qb)
                if na == 0.0 or nb == 0.0:
                    raise ZeroVector("zero joint vector has no cosine direction")
                total += float(qa @ qb / (na * nb))
    return 2.0 * w.w_ik_div / (m * n_heads * (n_heads - 1)) * total


def total_loss(
    scene: Scene,
    params: DesignParams,
    Q: np.ndarray,
    w: LossWeights | None = None,
    catalog: ModuleCatalog | None = None,
    clipped: bool = True,
    design_batch: list[list[DesignParams]] | None = None,
    ik_candidates: list[list[np.ndarray]] | None = None,
) -> LossBreakdown:
    """Eq-style combination: per-goal distance and collision sums, hardware,
    and (when batches are supplied) the diversity regularizers."""
    w = w or LossWeights()
    robot = build_robot(params, catalog)
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (robot.n, len(scene.goals)):
        raise ValueError(f"Q must be (n={robot.n}, m={len(scene.goals)}), got {Q.shape}")
    ctx = build_context(scene, robot)
    q_t = torch.as_tensor(Q.T, dtype=DT).unsqueeze(0)  # (1, m, n)
    with torch.no_grad():
        terms = eval_losses_t(ctx, q_t, None, w, clipped=clipped)
    reg = 0.0
    if design_batch is not None:
        n_choices = 5
        reg += design_diversity(design_batch, w, n_choices)
    if ik_candidates is not None:
        reg += ik_diversity(ik_candidates, w)
    return combine_terms(
        float(terms["distance"]), float(terms["collision"]), float(terms["hardware"]), reg, w
    )


def pose_errors(goal: Goal, ee: Pose) -> tuple[float, float]:
    """Unclipped (position, rotation) error; rotation is tolerance-adjusted."""
    pos_err = float(np.linalg.norm(goal.pose.position - ee.position))
    if goal.tolerance is ToleranceMode.POSITION_ONLY:
        return pos_err, 0.0
    r_rel = goal.pose.rotation.matrix.T @ ee.rotation.matrix
    if goal.tolerance is ToleranceMode.ROT_SYMMETRIC:
        rot_err = math.acos(min(1.0, max(-1.0, r_rel[2, 2])))
    else:
        tr = float(np.trace(r_rel))
        rot_err = math.acos(min(1.0, max(-1.0, (tr - 1.0) / 2.0)))
    return pos_err, rot_err


def solved_check(goal: Goal, ee: Pose) -> bool:
    """1 mm / 1 deg solved criterion with unclipped, tolerance-adjusted metrics."""
    pos_err, rot_err = pose_errors(goal, ee)
    if goal.tolerance is ToleranceMode.POSITION_ONLY:
        return pos_err < SOLVED_POS_TOL
    return pos_err < SOLVED_POS_TOL and rot_err < SOLVED_ROT_TOL


def normalized_score(loss: float, loss_min: float, loss_max: float) -> float:
    """1 at the best enumerated loss, 0 at the worst, clamped to [0, 1]."""
    if loss_max < loss_min:
        raise ValueError("loss_max must be >= loss_min")
    if loss_max == loss_min:
        return 1.0
    return float(min(1.0, max(0.0, (loss_max - loss) / (loss_max - loss_min))))

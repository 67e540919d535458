"""Morphology parameterization, robot realization, FK and the geometric Jacobian.

A robot with n revolute joints is a chain

    frame_i = frame_{i-1} * P_i * Rz(q_i) * D_i

where P_i is a constant pre-joint transform (identity for the parameterized
modes) and D_i is the link transform: Tz(d_i) * Tx(a_i) * Rx(alpha_i) built
from the (d, a, alpha) row for the free/economic modes, or a constant catalog
transform for the modular mode. Link geometry lives in the post-joint body
frame frame_{i-1} * P_i * Rz(q_i): a capsule of length d_i along z, then a
capsule of length a_i along x shifted by d_i; zero parameters contribute no
capsule, and a fully zero row degenerates to a single spherical body.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterator

import numpy as np
import torch

from .errors import BadSlot, ConstraintViolation, DegeneratePair, ParseError
from .geometry import DT, Capsule, Pose, rotation_from_6d

LINK_RADIUS = 0.06  # 120 mm link diameter

FREE_D_MAX = 0.4
FREE_A_MAX = 0.4
ECON_SEG_LO = 0.1
ECON_SEG_HI = 0.4
ECON_ALPHAS = (0.0, math.pi / 2.0, -math.pi / 2.0)

_TOL = 1e-9


class DesignMode(str, Enum):
    FREE = "free"
    ECONOMIC = "economic"
    MODULAR = "modular"


@dataclass(frozen=True, eq=False)
class DesignParams:
    """Per-joint (d, a, alpha) rows, or catalog slot indices for modular robots."""

    mode: DesignMode
    rows: np.ndarray | None = None
    slots: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.mode is DesignMode.MODULAR:
            if self.slots is None or len(self.slots) < 1:
                raise ValueError("modular params need at least one slot")
            object.__setattr__(self, "slots", tuple(int(s) for s in self.slots))
        else:
            rows = np.asarray(self.rows, dtype=float)
            if rows.ndim != 2 or rows.shape[1] != 3 or rows.shape[0] < 1:
                raise ValueError(f"rows must be (n, 3), got {rows.shape}")
            object.__setattr__(self, "rows", rows)

    @property
    def dof(self) -> int:
        return len(self.slots) if self.mode is DesignMode.MODULAR else self.rows.shape[0]

    def to_dict(self) -> dict:
        if self.mode is DesignMode.MODULAR:
            return {"mode": self.mode.value, "slots": list(self.slots)}
        return {"mode": self.mode.value, "rows": [[float(v) for v in r] for r in self.rows]}

    @staticmethod
    def from_dict(doc: dict) -> "DesignParams":
        try:
            mode = DesignMode(doc["mode"])
            if mode is DesignMode.MODULAR:
                return DesignParams(mode, slots=tuple(doc["slots"]))
            return DesignParams(mode, rows=np.asarray(doc["rows"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed design params: {exc}") from exc


def _in_econ_segment(v: float) -> bool:
    return ECON_SEG_LO - _TOL <= v <= ECON_SEG_HI + _TOL


def validate_params(params: DesignParams, catalog: "ModuleCatalog | None" = None) -> None:
    """Raise ConstraintViolation/BadSlot when params break their mode's set."""
    if params.mode is DesignMode.MODULAR:
        if catalog is None:
            raise ValueError("modular params require a catalog")
        k = len(catalog.choices)
        for s in params.slots:
            if not 0 <= s < k:
                raise BadSlot(f"slot index {s} outside catalog of {k} choices")
        return
    for i, (d, a, al) in enumerate(params.rows):
        if params.mode is DesignMode.FREE:
            if not (-_TOL <= d <= FREE_D_MAX + _TOL):
                raise ConstraintViolation(f"row {i}: d={d} outside [0, {FREE_D_MAX}]")
            if not abs(a) <= FREE_A_MAX + _TOL:
                raise ConstraintViolation(f"row {i}: |a|={abs(a)} above {FREE_A_MAX}")
            if not (-math.pi - _TOL <= al <= math.pi + _TOL):
                raise ConstraintViolation(f"row {i}: alpha={al} outside [-pi, pi]")
        else:
            if not (abs(d) < _TOL or _in_econ_segment(d)):
                raise ConstraintViolation(f"row {i}: d={d} outside {{0}} u [0.1, 0.4]")
            if not (abs(a) < _TOL or _in_econ_segment(abs(a))):
                raise ConstraintViolation(
                    f"row {i}: a={a} outside {{0}} u [-0.4, -0.1] u [0.1, 0.4]"
                )
            if not any(abs(al - c) < _TOL for c in ECON_ALPHAS):
                raise ConstraintViolation(f"row {i}: alpha={al} not in {{0, pi/2, -pi/2}}")


# ---------------------------------------------------------------------------
# module catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CatalogChoice:
    """One connection option: a joint plus an optional static extension."""

    id: str
    proximal: Pose
    distal: Pose
    capsules: tuple[Capsule, ...]
    cost: float


@dataclass(frozen=True, eq=False)
class ModuleCatalog:
    choices: tuple[CatalogChoice, ...]
    format_version: int = 1

    def __post_init__(self):
        if len(self.choices) < 1:
            raise ValueError("catalog needs at least one choice per slot")

    def to_dict(self) -> dict:
        def pose_doc(p: Pose) -> dict:
            return {
                "position": [float(v) for v in p.position],
                "orientation6d": [float(v) for v in p.rotation.as_6d()],
            }

        return {
            "format_version": self.format_version,
            "choices": [
                {
                    "id": c.id,
                    "proximal": pose_doc(c.proximal),
                    "distal": pose_doc(c.distal),
                    "capsules": [
                        {
                            "a": [float(v) for v in cap.endpoint_a],
                            "b": [float(v) for v in cap.endpoint_b],
                            "radius": float(cap.radius),
                        }
                        for cap in c.capsules
                    ],
                    "cost": float(c.cost),
                }
                for c in self.choices
            ],
        }

    @staticmethod
    def from_dict(doc: dict) -> "ModuleCatalog":
        try:
            version = int(doc["format_version"])
            choices = []
            for cd in doc["choices"]:
                def pose(p):
                    return Pose(
                        np.asarray(p["position"], dtype=float),
                        rotation_from_6d(np.asarray(p["orientation6d"], dtype=float)),
                    )

                caps = tuple(
                    Capsule(np.asarray(k["a"], float), np.asarray(k["b"], float), float(k["radius"]))
                    for k in cd["capsules"]
                )
                choices.append(
                    CatalogChoice(str(cd["id"]), pose(cd["proximal"]), pose(cd["distal"]), caps, float(cd["cost"]))
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed catalog document: {exc}") from exc
        return ModuleCatalog(tuple(choices), version)

    @staticmethod
    def load(path) -> "ModuleCatalog":
        with open(path, "rb") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid catalog JSON: {exc}") from exc
        return ModuleCatalog.from_dict(doc)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def default_catalog() -> ModuleCatalog:
    """The packaged five-choice catalog (placeholder dimensions, editable)."""
    data = resources.files("morphforge.data").joinpath("default_catalog.json").read_bytes()
    return ModuleCatalog.from_dict(json.loads(data))


# ---------------------------------------------------------------------------
# robot realization
# ---------------------------------------------------------------------------

# Capsule construction kinds: endpoints derived from the row values ("d", "a",
# "point") or constant catalog geometry ("const").
_CAP_D = "d"
_CAP_A = "a"
_CAP_POINT = "point"
_CAP_CONST = "const"


@dataclass(frozen=True, eq=False)
class CapsuleSpec:
    body: int
    kind: str
    a_local: np.ndarray
    b_local: np.ndarray
    radius: float


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Realized kinematic chain with link geometry and self-collision pairs."""

    n: int
    mode: DesignMode
    proximal: np.ndarray  # (n, 4, 4)
    distal: np.ndarray  # (n, 4, 4)
    rows: np.ndarray | None  # realized (n, 3) for parameterized modes
    slots: tuple[int, ...] | None
    capsule_specs: tuple[CapsuleSpec, ...]
    collision_pairs: tuple[tuple[int, int], ...]
    link_radius: float
    unit_cost: float

    @property
    def shape_count(self) -> int:
        return len(self.capsule_specs)

    def capsules_local(self) -> list[tuple[int, Capsule]]:
        return [
            (s.body, Capsule(s.a_local, s.b_local, s.radius) if s.radius > 0 else None)
            for s in self.capsule_specs
        ]


def dh_distal_matrix(d: float, a: float, alpha: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array(
        [
            [1.0, 0.0, 0.0, a],
            [0.0, ca, -sa, 0.0],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def _param_capsule_specs(rows: np.ndarray, radius: float) -> list[CapsuleSpec]:
    specs: list[CapsuleSpec] = []
    for i, (d, a, _) in enumerate(rows):
        has_d = d != 0.0
        has_a = a != 0.0
        if has_d:
            specs.append(
                CapsuleSpec(i, _CAP_D, np.zeros(3), np.array([0.0, 0.0, d]), radius)
            )
        if has_a:
            specs.append(
                CapsuleSpec(i, _CAP_A, np.array([0.0, 0.0, d]), np.array([a, 0.0, d]), radius)
            )
        if not has_d and not has_a:
            specs.append(CapsuleSpec(i, _CAP_POINT, np.zeros(3), np.zeros(3), radius))
    return specs


def _collision_pairs(specs: list[CapsuleSpec]) -> tuple[tuple[int, int], ...]:
    """All shape pairs except same-body and consecutive-body ones."""
    pairs = []
    for i in range(len(specs)):
        for j in range(i + 1, len(specs)):
            if abs(specs[i].body - specs[j].body) >= 2:
                pairs.append((i, j))
    return tuple(pairs)


def build_robot(
    params: DesignParams,
    catalog: ModuleCatalog | None = None,
    link_radius: float = LINK_RADIUS,
) -> RobotModel:
    validate_params(params, catalog)
    if params.mode is DesignMode.MODULAR:
        chosen = [catalog.choices[s] for s in params.slots]
        n = len(chosen)
        prox = np.stack([c.proximal.matrix() for c in chosen])
        dist = np.stack([c.distal.matrix() for c in chosen])
        specs = []
        for i, c in enumerate(chosen):
            for cap in c.capsules:
                specs.append(
                    CapsuleSpec(i, _CAP_CONST, cap.endpoint_a, cap.endpoint_b, cap.radius)
                )
        cost = float(sum(c.cost for c in chosen))
        return RobotModel(
            n=n,
            mode=params.mode,
            proximal=prox,
            distal=dist,
            rows=None,
            slots=params.slots,
            capsule_specs=tuple(specs),
            collision_pairs=_collision_pairs(specs),
            link_radius=link_radius,
            unit_cost=cost,
        )
    rows = params.rows
    n = rows.shape[0]
    prox = np.stack([np.eye(4)] * n)
    dist = np.stack([dh_distal_matrix(*row) for row in rows])
    specs = _param_capsule_specs(rows, link_radius)
    cost = float(np.sum(np.abs(rows[:, 1])) + np.sum(rows[:, 0]))
    return RobotModel(
        n=n,
        mode=params.mode,
        proximal=prox,
        distal=dist,
        rows=rows.copy(),
        slots=None,
        capsule_specs=tuple(specs),
        collision_pairs=_collision_pairs(specs),
        link_radius=link_radius,
        unit_cost=cost,
    )


# ---------------------------------------------------------------------------
# torch FK core
# ---------------------------------------------------------------------------


def rz_t(q: torch.Tensor) -> torch.Tensor:
    """(...,) angles -> (..., 4, 4) rotations about z."""
    c, s = torch.cos(q), torch.sin(q)
    z = torch.zeros_like(q)
    o = torch.ones_like(q)
    return torch.stack(
        [
            torch.stack([c, -s, z, z], -1),
            torch.stack([s, c, z, z], -1),
            torch.stack([z, z, o, z], -1),
            torch.stack([z, z, z, o], -1),
        ],
        -2,
    )


def dh_distal_t(rows: torch.Tensor) -> torch.Tensor:
    """(..., 3) rows (d, a, alpha) -> (..., 4, 4) link transforms."""
    d, a, al = rows[..., 0], rows[..., 1], rows[..., 2]
    ca, sa = torch.cos(al), torch.sin(al)
    z = torch.zeros_like(d)
    o = torch.ones_like(d)
    return torch.stack(
        [
            torch.stack([o, z, z, a], -1),
            torch.stack([z, ca, -sa, z], -1),
            torch.stack([z, sa, ca, d], -1),
            torch.stack([z, z, z, o], -1),
        ],
        -2,
    )


def fk_frames_t(
    q: torch.Tensor,
    prox: torch.Tensor,
    rows: torch.Tensor | None = None,
    dist_const: torch.Tensor | None = None,
    base: torch.Tensor | None = None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Batched FK.

    q: (..., n); prox: (n, 4, 4) or (..., n, 4, 4); rows: (..., n, 3) for the
    parameterized modes, else dist_const: (n, 4, 4) or (..., n, 4, 4).
    Returns (axis_frames, body_frames, frames), each (..., n, 4, 4): the joint
    axis frame before the joint rotation, the post-rotation body frame, and
    the full frame after the link transform.
    """
    batch = q.shape[:-1]
    n = q.shape[-1]
    eye = torch.eye(4, dtype=q.dtype)
    f = eye.expand(*batch, 4, 4) if base is None else base.expand(*batch, 4, 4)
    if rows is not None:
        dist = dh_distal_t(rows)
    else:
        dist = dist_const.expand(*batch, n, 4, 4)
    if prox.dim() == 3:
        prox = prox.expand(*batch, n, 4, 4)
    rzs = rz_t(q)
    axis_frames, body_frames, frames = [], [], []
    for i in range(n):
        a_i = f @ prox[..., i, :, :]
        g_i = a_i @ rzs[..., i, :, :]
        f = g_i @ dist[..., i, :, :]
        axis_frames.append(a_i)
        body_frames.append(g_i)
        frames.append(f)
    return (
        torch.stack(axis_frames, dim=-3),
        torch.stack(body_frames, dim=-3),
        torch.stack(frames, dim=-3),
    )


def geometric_jacobian_t(axis_frames: torch.Tensor, ee_pos: torch.Tensor) -> torch.Tensor:
    """(..., n, 4, 4) axis frames + (..., 3) ee position -> (..., 6, n)."""
    z = axis_frames[..., :3, 2]
    p = axis_frames[..., :3, 3]
    lin = torch.cross(z, ee_pos.unsqueeze(-2) - p, dim=-1)
    return torch.cat([lin, z], dim=-1).transpose(-1, -2)


def robot_tensors(robot: RobotModel) -> dict:
    """Constant torch tensors for a realized robot."""
    out = {
        "prox": torch.as_tensor(robot.proximal, dtype=DT),
        "dist": torch.as_tensor(robot.distal, dtype=DT),
        "rows": None if robot.rows is None else torch.as_tensor(robot.rows, dtype=DT),
    }
    return out


# ---------------------------------------------------------------------------
# numpy-facing API
# ---------------------------------------------------------------------------


def forward_kinematics(
    robot: RobotModel, q: np.ndarray, base: Pose | None = None
) -> tuple[list[Pose], Pose]:
    """Frames after each joint's link transform, plus the end-effector pose."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != robot.n:
        raise ValueError(f"expected {robot.n} joint angles, got {q.shape[0]}")
    t = robot_tensors(robot)
    base_t = None if base is None else torch.as_tensor(base.matrix(), dtype=DT)
    with torch.no_grad():
        _, _, frames = fk_frames_t(
            torch.as_tensor(q, dtype=DT),
            t["prox"],
            rows=t["rows"],
            dist_const=t["dist"] if t["rows"] is None else None,
            base=base_t,
        )
    poses = [Pose.from_matrix(frames[i].numpy()) for i in range(robot.n)]
    return poses, poses[-1]


def geometric_jacobian(robot: RobotModel, q: np.ndarray, base: Pose | None = None) -> np.ndarray:
    """6 x n Jacobian: column i = [z_{i-1} x (p_ee - p_{i-1}); z_{i-1}]."""
    q = np.asarray(q, dtype=float).reshape(-1)
    t = robot_tensors(robot)
    base_t = None if base is None else torch.as_tensor(base.matrix(), dtype=DT)
    with torch.no_grad():
        axis_frames, _, frames = fk_frames_t(
            torch.as_tensor(q, dtype=DT),
            t["prox"],
            rows=t["rows"],
            dist_const=t["dist"] if t["rows"] is None else None,
            base=base_t,
        )
        jac = geometric_jacobian_t(axis_frames, frames[-1, :3, 3])
    return jac.numpy()


def enumerate_assemblies(catalog: ModuleCatalog, dof: int) -> Iterator[DesignParams]:
    """Every modular assembly, in deterministic lexicographic order."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    k = len(catalog.choices)
    for slots in itertools.product(range(k), repeat=dof):
        yield DesignParams(DesignMode.MODULAR, slots=slots)


def assembly_count(catalog: ModuleCatalog, dof: int) -> int:
    return len(catalog.choices) ** dof


def joint_angles_from_xy(pairs: np.ndarray) -> np.ndarray:
    """q_i = atan2(x_i, y_i); scale-invariant and bounded to [-pi, pi]."""
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError(f"pairs must be (n, 2), got {pairs.shape}")
    if np.any((pairs[:, 0] == 0.0) & (pairs[:, 1] == 0.0)):
        raise DegeneratePair("joint (x, y) pair at the origin")
    return np.arctan2(pairs[:, 0], pairs[:, 1])


def wrap_angles(q: np.ndarray) -> np.ndarray:
    """Wrap to [-pi, pi]."""
    return (np.asarray(q, dtype=float) + math.pi) % (2.0 * math.pi) - math.pi


def total_reach(params: DesignParams, catalog: ModuleCatalog | None = None) -> float:
    """Sum of link lengths: an upper bound on the reachable radius."""
    if params.mode is DesignMode.MODULAR:
        return float(sum(catalog.choices[s].cost for s in params.slots))
    return float(np.sum(np.abs(params.rows[:, 1])) + np.sum(params.rows[:, 0]))

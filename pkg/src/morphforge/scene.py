"""Task definition: goals with tolerance modes, obstacles, workspace boxes.

Includes JSON round-tripping and the randomized task generators used by the
benchmark protocols. All generators take an explicit numpy Generator and are
deterministic under a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateInput, ParseError, SamplingExhausted, ValidationError
from .geometry import (
    Capsule,
    Pose,
    Rotation,
    Shape,
    Sphere,
    point_shape_distance,
    rotation_from_6d,
)


class ToleranceMode(str, Enum):
    FULL_POSE = "full_pose"
    ROT_SYMMETRIC = "rot_symmetric"
    POSITION_ONLY = "position_only"


@dataclass(frozen=True, eq=False)
class Goal:
    id: str
    pose: Pose
    tolerance: ToleranceMode = ToleranceMode.FULL_POSE


@dataclass(frozen=True, eq=False)
class Obstacle:
    id: str
    shape: Shape


@dataclass(frozen=True, eq=False)
class WorkspaceBox:
    center: np.ndarray
    extents: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        e = np.asarray(self.extents, dtype=float).reshape(3)
        if not np.all(e > 0):
            raise ValueError(f"workspace extents must be positive, got {e}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "extents", e)

    def scaled(self, factor: float) -> "WorkspaceBox":
        return WorkspaceBox(self.center, self.extents * factor)


@dataclass(eq=False)
class Scene:
    goals: list[Goal]
    obstacles: list[Obstacle] = field(default_factory=list)
    base_pose: Pose = field(default_factory=Pose.identity)
    rng_seed: int | None = None

    def __post_init__(self):
        if len(self.goals) < 1:
            raise ValidationError("a scene needs at least one goal")
        seen: set[str] = set()
        for g in self.goals:
            if g.id in seen:
                raise ValidationError(f"duplicate goal id {g.id!r}")
            seen.add(g.id)
        seen = set()
        for o in self.obstacles:
            if o.id in seen:
                raise ValidationError(f"duplicate obstacle id {o.id!r}")
            seen.add(o.id)
        for g in self.goals:
            for o in self.obstacles:
                if point_shape_distance(g.pose.position, o.shape) <= 0.0:
                    raise ValidationError(
                        f"goal {g.id!r} lies inside obstacle {o.id!r}"
                    )

    @property
    def max_goal_distance(self) -> float:
        base = self.base_pose.position
        return max(float(np.linalg.norm(g.pose.position - base)) for g in self.goals)


# ---------------------------------------------------------------------------
# JSON document I/O
# ---------------------------------------------------------------------------


def _pose_to_doc(pose: Pose) -> dict:
    return {
        "position": [float(v) for v in pose.position],
        "orientation6d": [float(v) for v in pose.rotation.as_6d()],
    }


def _pose_from_doc(doc: dict) -> Pose:
    try:
        pos = np.asarray(doc["position"], dtype=float).reshape(3)
        r6 = np.asarray(doc["orientation6d"], dtype=float).reshape(6)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed pose document: {exc}") from exc
    try:
        rot = rotation_from_6d(r6)
    except DegenerateInput as exc:
        raise ParseError(f"malformed pose orientation: {exc}") from exc
    return Pose(pos, rot)


def _shape_to_doc(shape: Shape) -> dict:
    if isinstance(shape, Sphere):
        return {
            "type": "sphere",
            "center": [float(v) for v in shape.center],
            "radius": float(shape.radius),
        }
    return {
        "type": "capsule",
        "a": [float(v) for v in shape.endpoint_a],
        "b": [float(v) for v in shape.endpoint_b],
        "radius": float(shape.radius),
    }


def _shape_from_doc(doc: dict) -> Shape:
    try:
        kind = doc["type"]
        if kind == "sphere":
            return Sphere(np.asarray(doc["center"], dtype=float), float(doc["radius"]))
        if kind == "capsule":
            return Capsule(
                np.asarray(doc["a"], dtype=float),
                np.asarray(doc["b"], dtype=float),
                float(doc["radius"]),
            )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed obstacle shape: {exc}") from exc
    raise ParseError(f"unknown obstacle type {doc.get('type')!r}")


def scene_to_dict(scene: Scene) -> dict:
    doc: dict = {
        "goals": [
            {
                "id": g.id,
                "position": [float(v) for v in g.pose.position],
                "orientation6d": [float(v) for v in g.pose.rotation.as_6d()],
                "tolerance": g.tolerance.value,
            }
            for g in scene.goals
        ],
        "obstacles": [
            {"id": o.id, **_shape_to_doc(o.shape)} for o in scene.obstacles
        ],
        "base_pose": _pose_to_doc(scene.base_pose),
    }
    if scene.rng_seed is not None:
        doc["seed"] = int(scene.rng_seed)
    return doc


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise ParseError("scene document must be a JSON object")
    try:
        goal_docs = doc["goals"]
        obstacle_docs = doc.get("obstacles", [])
    except TypeError as exc:
        raise ParseError(f"malformed scene document: {exc}") from exc
    if not isinstance(goal_docs, list) or not isinstance(obstacle_docs, list):
        raise ParseError("goals and obstacles must be lists")
    goals = []
    for gd in goal_docs:
        pose = _pose_from_doc(gd)
        try:
            tol = ToleranceMode(gd.get("tolerance", "full_pose"))
            gid = str(gd["id"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"malformed goal entry: {exc}") from exc
        goals.append(Goal(gid, pose, tol))
    obstacles = []
    for od in obstacle_docs:
        try:
            oid = str(od["id"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"obstacle entry missing id: {exc}") from exc
        obstacles.append(Obstacle(oid, _shape_from_doc(od)))
    base = _pose_from_doc(doc["base_pose"]) if "base_pose" in doc else Pose.identity()
    seed = doc.get("seed")
    return Scene(goals, obstacles, base, None if seed is None else int(seed))


def save_scene(scene: Scene) -> bytes:
    return json.dumps(scene_to_dict(scene), indent=2, sort_keys=True).encode()


def load_scene(data: bytes | str) -> Scene:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return scene_from_dict(doc)


# ---------------------------------------------------------------------------
# randomized generation
# ---------------------------------------------------------------------------


def random_rotation(rng: np.random.Generator) -> Rotation:
    """Uniform over SO(3): normalized Gaussian 4-vector as a unit quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    m = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    # Canonicalize through the 6-value representation so that save/load
    # reproduces the matrix bit-exactly.
    return rotation_from_6d(np.concatenate([m[:, 0], m[:, 1]]))


def _uniform_in_ball(rng: np.random.Generator, radius: float) -> np.ndarray:
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    r = radius * rng.uniform() ** (1.0 / 3.0)
    return r * direction


def sample_cluttered_task(
    n_goals: int,
    n_obstacles: int,
    max_dist: float,
    radius_range: tuple[float, float] = (0.05, 0.15),
    rng: np.random.Generator | None = None,
    tolerance: ToleranceMode = ToleranceMode.FULL_POSE,
    base_clearance: float = 0.05,
    max_resamples: int = 1000,
    seed: int | None = None,
) -> Scene:
    """Random task: goals uniform in a ball around the base, spherical clutter.

    Obstacles are resampled until none intersects any goal position (or the
    base keep-out ball, since the mount physically occupies the origin).
    """
    if n_goals < 1:
        raise ValueError("n_goals must be >= 1")
    if max_dist <= 0:
        raise ValueError("max_dist must be positive")
    if rng is None:
        rng = np.random.default_rng(seed)
    goals = []
    for i in range(n_goals):
        pos = _uniform_in_ball(rng, max_dist)
        goals.append(Goal(f"goal_{i}", Pose(pos, random_rotation(rng)), tolerance))
    obstacles = []
    lo, hi = radius_range
    for i in range(n_obstacles):
        for _ in range(max_resamples):
            center = _uniform_in_ball(rng, max_dist)
            radius = rng.uniform(lo, hi)
            sphere = Sphere(center, radius)
            clear_of_goals = all(
                point_shape_distance(g.pose.position, sphere) > 0.0 for g in goals
            )
            clear_of_base = (
                float(np.linalg.norm(center)) - radius > base_clearance
            )
            if clear_of_goals and clear_of_base:
                obstacles.append(Obstacle(f"obstacle_{i}", sphere))
                break
        else:
            raise SamplingExhausted(
                f"could not place obstacle {i} clear of goals in {max_resamples} tries"
            )
    return Scene(goals, obstacles, Pose.identity(), rng_seed=seed)


def sample_workspace_goals(
    ws: WorkspaceBox,
    n: int,
    tolerance: ToleranceMode,
    rng: np.random.Generator,
) -> list[Goal]:
    """Positions uniform in the box, orientations uniform on SO(3)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    goals = []
    half = ws.extents / 2.0
    for i in range(n):
        pos = ws.center + rng.uniform(-half, half)
        goals.append(Goal(f"goal_{i}", Pose(pos, random_rotation(rng)), tolerance))
    return goals


def decompose_obstacle(obstacle: Obstacle, spacing: float | None = None) -> list[Sphere]:
    """Spheres covering the obstacle axis; spheres pass through unchanged.

    Capsules are covered by spheres of the capsule radius centered along the
    axis at most ``spacing`` apart, endpoints included; every sphere lies
    inside the capsule. Default spacing is one obstacle radius.
    """
    shape = obstacle.shape
    if isinstance(shape, Sphere):
        return [shape]
    if spacing is None:
        spacing = shape.radius
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    a, b = shape.endpoint_a, shape.endpoint_b
    length = float(np.linalg.norm(b - a))
    if length == 0.0:
        return [Sphere(a.copy(), shape.radius)]
    count = int(math.ceil(length / spacing)) + 1
    params = np.linspace(0.0, 1.0, count)
    return [Sphere(a + t * (b - a), shape.radius) for t in params]


def scene_obstacle_spheres(scene: Scene, spacing: float | None = None) -> np.ndarray:
    """All decomposed obstacle spheres as an (K, 4) array of (x, y, z, r)."""
    rows = []
    for o in scene.obstacles:
        for s in decompose_obstacle(o, spacing):
            rows.append([*s.center, s.radius])
    if not rows:
        return np.zeros((0, 4))
    return np.asarray(rows, dtype=float)

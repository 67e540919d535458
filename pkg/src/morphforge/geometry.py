"""Rigid-body poses, rotation metrics, and analytic signed distances.

Spheres and capsules are the only collision primitives. A capsule is defined
by the segment between its two endpoints plus a radius; a sphere is the
degenerate capsule whose endpoints coincide. All distances are in meters,
all angles in radians (degrees only at I/O boundaries).

The distance kernels are written once, in torch (float64), so that the same
code serves scalar queries, batched collision sweeps, and autograd.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import DegenerateInput

DT = torch.float64

_ORTHO_TOL = 1e-9
# Below this squared length a segment is treated as a point.
_SEG_EPS = 1e-30


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Rotation:
    """3x3 rotation matrix, orthonormal with det +1.

    ``r6`` optionally carries the continuous 6-value representation the
    rotation was built from, so that scene files round-trip bit-exactly.
    """

    matrix: np.ndarray
    r6: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.shape != (3, 3):
            raise ValueError(f"rotation matrix must be 3x3, got {m.shape}")
        if np.linalg.norm(m.T @ m - np.eye(3)) > _ORTHO_TOL:
            raise ValueError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(m) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation matrix must have determinant +1")

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.eye(3))

    @staticmethod
    def about_x(angle: float) -> "Rotation":
        c, s = math.cos(angle), math.sin(angle)
        return Rotation(np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]]))

    @staticmethod
    def about_y(angle: float) -> "Rotation":
        c, s = math.cos(angle), math.sin(angle)
        return Rotation(np.array([[c, 0, s], [0, 1.0, 0], [-s, 0, c]]))

    @staticmethod
    def about_z(angle: float) -> "Rotation":
        c, s = math.cos(angle), math.sin(angle)
        return Rotation(np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]]))

    def as_6d(self) -> np.ndarray:
        """First two columns, or the stored source vector when available."""
        if self.r6 is not None:
            return np.asarray(self.r6, dtype=float)
        return np.concatenate([self.matrix[:, 0], self.matrix[:, 1]])

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)


@dataclass(frozen=True, eq=False)
class Pose:
    """Position plus orientation of a rigid frame."""

    position: np.ndarray
    rotation: Rotation

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError("pose position must be finite")
        object.__setattr__(self, "position", p)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), Rotation.identity())

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.matrix
        m[:3, 3] = self.position
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(m[:3, 3].copy(), Rotation(m[:3, :3].copy()))

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.rotation.matrix @ np.asarray(p, dtype=float) + self.position


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ValueError(f"sphere radius must be positive, got {self.radius}")


@dataclass(frozen=True, eq=False)
class Capsule:
    endpoint_a: np.ndarray
    endpoint_b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "endpoint_a", np.asarray(self.endpoint_a, dtype=float).reshape(3))
        object.__setattr__(self, "endpoint_b", np.asarray(self.endpoint_b, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ValueError(f"capsule radius must be positive, got {self.radius}")


Shape = Sphere | Capsule


# ---------------------------------------------------------------------------
# pose composition and rotation construction
# ---------------------------------------------------------------------------


def compose(parent: Pose, child: Pose) -> Pose:
    """Chain two frames: world_from_child = world_from_parent * parent_from_child."""
    r = parent.rotation.matrix @ child.rotation.matrix
    p = parent.rotation.matrix @ child.position + parent.position
    return Pose(p, Rotation(r))


def rotation_from_6d(r: np.ndarray) -> Rotation:
    """Gram-Schmidt the two 3-vectors of the continuous 6-value representation."""
    r = np.asarray(r, dtype=float).reshape(6)
    a1, a2 = r[:3], r[3:]
    n1 = np.linalg.norm(a1)
    if n1 < 1e-12:
        raise DegenerateInput("first basis vector of 6d orientation is zero")
    b1 = a1 / n1
    a2p = a2 - np.dot(b1, a2) * b1
    n2 = np.linalg.norm(a2p)
    if n2 < 1e-9 * max(1.0, np.linalg.norm(a2)):
        raise DegenerateInput("6d orientation vectors are parallel")
    b2 = a2p / n2
    b3 = np.cross(b1, b2)
    return Rotation(np.column_stack([b1, b2, b3]), r6=r.copy())


# ---------------------------------------------------------------------------
# rotation metrics
# ---------------------------------------------------------------------------


def rotation_angle(ra: Rotation, rb: Rotation) -> float:
    """Geodesic angle between two rotations, exact, for metric reporting."""
    tr = float(np.trace(ra.matrix.T @ rb.matrix))
    x = min(1.0, max(-1.0, (tr - 1.0) / 2.0))
    return math.acos(x)


def clip_epsilon(clip_deg: float) -> float:
    """Trace-argument margin so arccos never reaches its infinite-slope poles."""
    return 1.0 - math.cos(math.radians(clip_deg))


def rotation_angle_clipped(ra: Rotation, rb: Rotation, clip_deg: float = 0.2) -> float:
    """Angle with the trace argument clamped symmetrically away from +/-1.

    The returned value never drops below ``clip_deg`` (in radians); it is used
    only inside loss and gradient evaluation, never for reporting.
    """
    tr = float(np.trace(ra.matrix.T @ rb.matrix))
    eps = clip_epsilon(clip_deg)
    x = min(1.0 - eps, max(-1.0 + eps, (tr - 1.0) / 2.0))
    return math.acos(x)


def angle_from_trace_t(tr: torch.Tensor) -> torch.Tensor:
    """Batched exact rotation angle from the trace of a relative rotation."""
    return torch.acos(torch.clamp((tr - 1.0) / 2.0, -1.0, 1.0))


def clipped_excess_angle_t(tr: torch.Tensor, clip_deg: float) -> torch.Tensor:
    """Batched clipped angle, shifted so values at or below the clip floor are 0.

    Clamping keeps the arccos argument away from +/-1 (finite gradients);
    subtracting the floor makes errors smaller than ``clip_deg`` contribute
    nothing, so a perfect pose yields exactly zero loss.
    """
    clip_rad = math.radians(clip_deg)
    eps = 1.0 - math.cos(clip_rad)
    x = torch.clamp((tr - 1.0) / 2.0, -1.0 + eps, 1.0 - eps)
    return torch.clamp(torch.acos(x) - clip_rad, min=0.0)


# ---------------------------------------------------------------------------
# signed distances
# ---------------------------------------------------------------------------


def segment_closest_params_t(
    p1: torch.Tensor,
    q1: torch.Tensor,
    p2: torch.Tensor,
    q2: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Closest-point parameters (s, t) in [0,1] between two batched segments.

    Branch-free clamped formulation; parallel axes tie-break to the segment
    parameter midpoint, which picks one valid subgradient at the tie.
    """
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = (d1 * d1).sum(-1)
    e = (d2 * d2).sum(-1)
    b = (d1 * d2).sum(-1)
    c = (d1 * r).sum(-1)
    f = (d2 * r).sum(-1)

    denom = a * e - b * b
    denom_ok = denom > _SEG_EPS
    s = torch.where(
        denom_ok,
        (b * f - c * e) / torch.clamp(denom, min=_SEG_EPS),
        torch.full_like(denom, 0.5),
    )
    s = torch.clamp(s, 0.0, 1.0)

    e_ok = e > _SEG_EPS
    t = torch.clamp((b * s + f) / torch.clamp(e, min=_SEG_EPS), 0.0, 1.0)
    t = torch.where(e_ok, t, torch.zeros_like(t))

    a_ok = a > _SEG_EPS
    s = torch.where(
        a_ok,
        torch.clamp((b * t - c) / torch.clamp(a, min=_SEG_EPS), 0.0, 1.0),
        torch.zeros_like(s),
    )
    return s, t


def capsule_capsule_sd_t(
    p1: torch.Tensor,
    q1: torch.Tensor,
    r1: torch.Tensor,
    p2: torch.Tensor,
    q2: torch.Tensor,
    r2: torch.Tensor,
) -> torch.Tensor:
    """Batched signed distance between capsules (spheres are point segments)."""
    s, t = segment_closest_params_t(p1, q1, p2, q2)
    c1 = p1 + s.unsqueeze(-1) * (q1 - p1)
    c2 = p2 + t.unsqueeze(-1) * (q2 - p2)
    diff = c1 - c2
    dist = torch.sqrt(torch.clamp((diff * diff).sum(-1), min=_SEG_EPS))
    return dist - r1 - r2


def _shape_segment(shape: Shape) -> tuple[np.ndarray, np.ndarray, float]:
    if isinstance(shape, Sphere):
        return shape.center, shape.center, shape.radius
    return shape.endpoint_a, shape.endpoint_b, shape.radius


def signed_distance(a: Shape, b: Shape) -> float:
    """Analytic signed distance; negative iff the shapes penetrate."""
    pa, qa, ra = _shape_segment(a)
    pb, qb, rb = _shape_segment(b)
    sd = capsule_capsule_sd_t(
        torch.as_tensor(pa, dtype=DT),
        torch.as_tensor(qa, dtype=DT),
        torch.as_tensor(ra, dtype=DT),
        torch.as_tensor(pb, dtype=DT),
        torch.as_tensor(qb, dtype=DT),
        torch.as_tensor(rb, dtype=DT),
    )
    return float(sd)


def point_shape_distance(point: np.ndarray, shape: Shape) -> float:
    """Signed distance from a point (zero-radius sphere) to a shape."""
    p = np.asarray(point, dtype=float)
    pb, qb, rb = _shape_segment(shape)
    sd = capsule_capsule_sd_t(
        torch.as_tensor(p, dtype=DT),
        torch.as_tensor(p, dtype=DT),
        torch.zeros((), dtype=DT),
        torch.as_tensor(pb, dtype=DT),
        torch.as_tensor(qb, dtype=DT),
        torch.as_tensor(rb, dtype=DT),
    )
    return float(sd)

"""Differentiation of the task loss w.r.t. joint angles and continuous
design parameters, plus the central finite-difference validation oracle.

Gradients come from reverse-mode differentiation of the same computation
graph the loss uses; the finite-difference check is the contract. Entries for
discrete economic classes (alpha, zero-valued d/a) and modular slots are
exactly zero unless routed through a relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .errors import NonFinite
from .geometry import DT
from .kinematics import (
    DesignMode,
    DesignParams,
    FREE_A_MAX,
    FREE_D_MAX,
    ModuleCatalog,
    build_robot,
)
from .objective import LossWeights, TaskContext, build_context, eval_losses_t
from .scene import Scene


@dataclass
class GradResult:
    value: float
    d_params: np.ndarray  # (n, 3)
    d_Q: np.ndarray  # (n, m)


def _free_mask(params: DesignParams) -> np.ndarray:
    """True where a row entry is a free (differentiable) coordinate."""
    rows = params.rows
    if params.mode is DesignMode.FREE:
        return np.ones_like(rows, dtype=bool)
    # economic: interval-interior d/a entries move continuously, the rest are
    # discrete class choices
    mask = np.zeros_like(rows, dtype=bool)
    mask[:, 0] = rows[:, 0] != 0.0
    mask[:, 1] = rows[:, 1] != 0.0
    return mask


def _eval_total_t(
    ctx: TaskContext,
    rows_t: torch.Tensor | None,
    q_t: torch.Tensor,
    w: LossWeights,
) -> torch.Tensor:
    terms = eval_losses_t(ctx, q_t, rows_t, w, clipped=True)
    return (
        w.w_d * terms["distance"]
        + w.w_col * terms["collision"]
        + w.w_hw * terms["hardware"]
    ).squeeze(0)


def loss_and_grad(
    scene: Scene,
    params: DesignParams,
    Q: np.ndarray,
    w: LossWeights | None = None,
    catalog: ModuleCatalog | None = None,
) -> GradResult:
    """Total loss plus its gradient w.r.t. rows and joint angles."""
    w = w or LossWeights()
    robot = build_robot(params, catalog)
    Q = np.asarray(Q, dtype=float)
    m = len(scene.goals)
    if Q.shape != (robot.n, m):
        raise ValueError(f"Q must be ({robot.n}, {m}), got {Q.shape}")
    ctx = build_context(scene, robot)

    q_t = torch.as_tensor(Q.T, dtype=DT).unsqueeze(0).requires_grad_(True)
    rows_t = None
    if params.mode is not DesignMode.MODULAR:
        rows_t = torch.as_tensor(params.rows, dtype=DT).unsqueeze(0).requires_grad_(True)

    value_t = _eval_total_t(ctx, rows_t, q_t, w)
    value_t.backward()

    value = float(value_t.detach())
    d_q = q_t.grad[0].numpy().T.copy()  # back to (n, m)
    if rows_t is None:
        d_params = np.zeros((robot.n, 3))
    else:
        d_params = rows_t.grad[0].numpy().copy()
        d_params[~_free_mask(params)] = 0.0

    if not (math.isfinite(value) and np.all(np.isfinite(d_params)) and np.all(np.isfinite(d_q))):
        raise NonFinite("loss or gradient is not finite")
    return GradResult(value, d_params, d_q)


def _loss_value(
    ctx: TaskContext,
    rows: np.ndarray | None,
    Q: np.ndarray,
    w: LossWeights,
) -> float:
    q_t = torch.as_tensor(Q.T, dtype=DT).unsqueeze(0)
    rows_t = None if rows is None else torch.as_tensor(rows, dtype=DT).unsqueeze(0)
    with torch.no_grad():
        return float(_eval_total_t(ctx, rows_t, q_t, w))


def _central_diff(f, x0: float, h: float) -> float:
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h)


def finite_difference_check(
    scene: Scene,
    params: DesignParams,
    Q: np.ndarray,
    w: LossWeights | None = None,
    step: float = 1e-6,
    catalog: ModuleCatalog | None = None,
) -> float:
    """Worst relative error between analytic gradients and central differences.

    Coordinates are excluded when they sit within 2*step of a nondifferentiable
    tie: domain boundaries, the capsule-insertion switch at zero link lengths,
    and any point where the finite difference itself is inconsistent between
    step sizes h and 2h (kinks from the collision threshold, clip boundaries,
    or closest-point clamps).
    """
    w = w or LossWeights()
    g = loss_and_grad(scene, params, Q, w, catalog)
    robot = build_robot(params, catalog)
    ctx = build_context(scene, robot)
    Q = np.asarray(Q, dtype=float)

    checks: list[tuple[float, float]] = []  # (analytic, fd) pairs

    def consistent_fd(f, x0: float) -> float | None:
        fd1 = _central_diff(f, x0, step)
        fd2 = _central_diff(f, x0, 2.0 * step)
        scale = max(abs(fd1), abs(fd2), 1e-3)
        if abs(fd1 - fd2) > 0.05 * scale:
            return None  # near a kink; excluded
        return fd1

    if params.mode is not DesignMode.MODULAR:
        rows0 = params.rows.copy()
        mask = _free_mask(params)
        bounds = {
            DesignMode.FREE: [(0.0, FREE_D_MAX), (-FREE_A_MAX, FREE_A_MAX), (-math.pi, math.pi)],
            DesignMode.ECONOMIC: [(0.1, 0.4), (-0.4, 0.4), (None, None)],
        }[params.mode]
        for i in range(rows0.shape[0]):
            for j in range(3):
                if not mask[i, j]:
                    continue
                x0 = rows0[i, j]
                lo, hi = bounds[j]
                if lo is not None and (x0 - 2 * step < lo or x0 + 2 * step > hi):
                    continue  # domain boundary
                if j in (0, 1) and abs(x0) < 2 * step:
                    continue  # capsule-insertion switch
                if params.mode is DesignMode.ECONOMIC and j == 1 and abs(abs(x0) - 0.1) < 2 * step:
                    continue  # sign-branch boundary
                def f(v, i=i, j=j):
                    rows = rows0.copy()
                    rows[i, j] = v
                    return _loss_value(ctx, rows, Q, w)

                fd = consistent_fd(f, x0)
                if fd is not None:
                    checks.append((g.d_params[i, j], fd))

    for i in range(Q.shape[0]):
        for jg in range(Q.shape[1]):
            x0 = Q[i, jg]

            def f(v, i=i, jg=jg):
                qq = Q.copy()
                qq[i, jg] = v
                return _loss_value(ctx, None if params.mode is DesignMode.MODULAR else params.rows, qq, w)

            fd = consistent_fd(f, x0)
            if fd is not None:
                checks.append((g.d_Q[i, jg], fd))

    worst = 0.0
    for analytic, fd in checks:
        denom = max(abs(analytic), abs(fd), 1e-3)
        worst = max(worst, abs(analytic - fd) / denom)
    return worst

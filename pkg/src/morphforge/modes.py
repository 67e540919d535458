"""Design-mode constraint machinery.

Logistic squashing for the free mode, the Gumbel-softmax relaxation for
economic/modular discrete choices (soft weights during optimization,
straight-through hard sampling otherwise), and the linear temperature
schedule. All randomness comes from an explicit numpy Generator.
"""

from __future__ import annotations

import math

import numpy as np
import torch

from .kinematics import ECON_ALPHAS, ECON_SEG_HI, ECON_SEG_LO

TEMP_START = 3.0
TEMP_END = 0.01


def squash_free(raw, lo: float, hi: float):
    """lo + (hi - lo) * sigmoid(raw); strictly monotone, differentiable."""
    if lo >= hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if isinstance(raw, torch.Tensor):
        return lo + (hi - lo) * torch.sigmoid(raw)
    raw = np.asarray(raw, dtype=float)
    # overflow-safe logistic
    pos = raw >= 0
    z = np.exp(np.where(pos, -raw, raw))
    sig = np.where(pos, 1.0 / (1.0 + z), z / (1.0 + z))
    out = lo + (hi - lo) * sig
    return float(out) if out.ndim == 0 else out


def unsquash_free(value, lo: float, hi: float, margin: float = 1e-6):
    """Inverse of squash_free, with the ratio clamped away from {0, 1}."""
    value = np.asarray(value, dtype=float)
    ratio = np.clip((value - lo) / (hi - lo), margin, 1.0 - margin)
    out = np.log(ratio / (1.0 - ratio))
    return float(out) if out.ndim == 0 else out


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(low=np.finfo(float).tiny, high=1.0, size=shape)
    return -np.log(-np.log(u))


def gumbel_softmax(
    logits: np.ndarray,
    tau: float,
    rng: np.random.Generator,
    hard: bool = False,
) -> np.ndarray:
    """Sample class weights: soft probabilities, or the one-hot argmax.

    Soft weights sum to one; the hard vector is exactly the one-hot argmax of
    the soft weights (the straight-through gradient convention lives in the
    torch variant).
    """
    logits = np.asarray(logits, dtype=float)
    if logits.shape[-1] < 2:
        raise ValueError("need at least 2 classes")
    if tau <= 0:
        raise ValueError("temperature must be positive")
    g = gumbel_noise(logits.shape, rng)
    y = (logits + g) / tau
    y = y - y.max(axis=-1, keepdims=True)
    soft = np.exp(y)
    soft /= soft.sum(axis=-1, keepdims=True)
    if not hard:
        return soft
    one_hot = np.zeros_like(soft)
    idx = soft.argmax(axis=-1)
    np.put_along_axis(one_hot, np.expand_dims(idx, -1), 1.0, axis=-1)
    return one_hot


def gumbel_softmax_t(
    logits: torch.Tensor,
    tau: float,
    noise: torch.Tensor,
    hard: bool = False,
) -> torch.Tensor:
    """Torch variant with explicit noise; hard uses the straight-through trick."""
    soft = torch.softmax((logits + noise) / tau, dim=-1)
    if not hard:
        return soft
    idx = soft.argmax(dim=-1, keepdim=True)
    one_hot = torch.zeros_like(soft).scatter_(-1, idx, 1.0)
    return (one_hot - soft).detach() + soft


def branch_value(raw):
    """Map an unconstrained magnitude into the economic segment [0.1, 0.4]."""
    return squash_free(raw, ECON_SEG_LO, ECON_SEG_HI)


def economic_class_values(kind: str, continuous_raw):
    """Class value vector for one economic parameter.

    d has classes {0, +branch}; a has {0, -branch, +branch}; alpha has the
    constants {0, pi/2, -pi/2}.
    """
    torch_mode = isinstance(continuous_raw, torch.Tensor)
    if kind == "d":
        b = branch_value(continuous_raw)
        vals = [torch.zeros_like(b) if torch_mode else 0.0, b]
    elif kind == "a":
        b = branch_value(continuous_raw)
        vals = [torch.zeros_like(b) if torch_mode else 0.0, -b, b]
    elif kind == "alpha":
        if torch_mode:
            vals = [torch.full_like(continuous_raw, c) for c in ECON_ALPHAS]
        else:
            vals = list(ECON_ALPHAS)
    else:
        raise ValueError(f"unknown economic parameter kind {kind!r}")
    if torch_mode:
        return torch.stack(vals, dim=-1)
    return np.asarray(vals, dtype=float)


def economic_value(class_weights, kind: str, continuous_raw):
    """Relaxed parameter value: the class-weighted sum of class values."""
    values = economic_class_values(kind, continuous_raw)
    if isinstance(values, torch.Tensor):
        w = class_weights if isinstance(class_weights, torch.Tensor) else torch.as_tensor(class_weights, dtype=values.dtype)
        return (w * values).sum(-1)
    w = np.asarray(class_weights, dtype=float)
    return float(np.dot(w, values))


def temperature(step: int, total_steps: int, start: float = TEMP_START, end: float = TEMP_END) -> float:
    """Linear schedule from start to end over total_steps."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if total_steps == 0:
        return end
    frac = step / total_steps
    return start * (1.0 - frac) + end * frac


def econ_num_classes(kind: str) -> int:
    return {"d": 2, "a": 3, "alpha": 3}[kind]


def sigmoid_inverse_branch(value: float, margin: float = 1e-6) -> float:
    """Raw magnitude whose branch_value is |value| (for warm-starting)."""
    v = abs(float(value))
    if v == 0.0:
        return 0.0
    return float(unsquash_free(v, ECON_SEG_LO, ECON_SEG_HI, margin))


def econ_logits_from_rows(rows: np.ndarray, confidence: float = 4.0) -> dict:
    """Warm-start relaxation state from realized economic rows."""
    n = rows.shape[0]
    logits_d = np.zeros((n, 2))
    logits_a = np.zeros((n, 3))
    logits_al = np.zeros((n, 3))
    raw_d = np.zeros(n)
    raw_a = np.zeros(n)
    for i, (d, a, al) in enumerate(rows):
        logits_d[i, 1 if d != 0.0 else 0] = confidence
        if a == 0.0:
            logits_a[i, 0] = confidence
        elif a < 0.0:
            logits_a[i, 1] = confidence
        else:
            logits_a[i, 2] = confidence
        cls = int(np.argmin([abs(al - c) for c in ECON_ALPHAS]))
        logits_al[i, cls] = confidence
        raw_d[i] = sigmoid_inverse_branch(d)
        raw_a[i] = sigmoid_inverse_branch(a)
    return {
        "logits_d": logits_d,
        "logits_a": logits_a,
        "logits_alpha": logits_al,
        "raw_d": raw_d,
        "raw_a": raw_a,
    }

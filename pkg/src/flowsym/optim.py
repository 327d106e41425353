"""Adam and learning-rate schedules."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if np.shape(self.m) != np.shape(self.v):
            raise ShapeMismatch("Adam moment shapes differ")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.t < 0:
            raise ValueError("step count must be non-negative")

    @classmethod
    def init(cls, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        shape = np.shape(params)
        return cls(np.zeros(shape), np.zeros(shape), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params, gradient, lr: float | None = None):
    """One bias-corrected Adam update. Returns ``(new_state, new_params)``."""
    params = np.asarray(params, dtype=float)
    g = np.asarray(gradient, dtype=float)
    if params.shape != state.m.shape or g.shape != state.m.shape:
        raise ShapeMismatch(f"params {params.shape} / gradient {g.shape} do not match state {state.m.shape}")
    lr = state.lr if lr is None else lr
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    mhat = m / (1.0 - state.beta1**t)
    vhat = v / (1.0 - state.beta2**t)
    new = params - lr * mhat / (np.sqrt(vhat) + state.eps)
    return replace(state, m=m, v=v, t=t), new


def lr_schedule(kind: str, step: int, start: float, end: float | None = None, horizon: int = 1) -> float:
    """``constant`` returns ``start``; ``linear_ramp`` interpolates start→end over ``horizon`` steps, then holds."""
    if kind == "constant":
        return float(start)
    if kind == "linear_ramp":
        if end is None:
            raise ValueError("linear_ramp needs an end value")
        frac = min(max(step / max(horizon, 1), 0.0), 1.0)
        return float(start + (end - start) * frac)
    raise ValueError(f"unknown schedule {kind!r}")

"""Fixed-step RK4 integration of autonomous vector fields with exact discrete gradients.

Any object exposing ``evaluate(p, divergence=...)`` and
``backward(p, g_value, g_div, ...)`` with the semantics of
:class:`flowsym.field.SymmetrizedField` can be integrated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NonFiniteState, ShapeMismatch
from .field import FieldGrad

BLOWUP = 1e6
_W = (1.0, 2.0, 2.0, 1.0)


@dataclass(frozen=True)
class IntegratorConfig:
    t0: float = 0.0
    t1: float = 1.0
    steps: int = 32
    scheme: str = "rk4"

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)) or self.t1 == self.t0:
            raise ValueError("integration interval must be finite with t1 != t0")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        if self.scheme.lower() != "rk4":
            raise ValueError(f"unsupported scheme {self.scheme!r}")

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.steps


@dataclass
class Trajectory:
    """State checkpoints ``(steps + 1, N, 2)`` of one integration, plus running ``log p`` change."""

    states: np.ndarray
    h: float
    logdet: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _check_finite(z):
    if not np.all(np.isfinite(z)) or np.max(np.abs(z), initial=0.0) > BLOWUP:
        raise NonFiniteState("integrated state left the finite range")


def _integrate(field, q, h, steps, with_div, store=True):
    z = np.array(q, dtype=float).reshape(-1, 2)
    _check_finite(z)
    states = np.empty(((steps + 1) if store else 1,) + z.shape)
    states[0] = z
    logp = np.zeros((steps + 1, len(z))) if with_div else None
    for n in range(steps):
        ks, ds = [], []
        zi = z
        for i in range(4):
            ev = field.evaluate(zi, divergence=with_div)
            ks.append(ev.value)
            if with_div:
                ds.append(ev.divergence)
            if i < 3:
                zi = z + (h if i == 2 else 0.5 * h) * ev.value
        z = z + (h / 6.0) * (ks[0] + 2.0 * ks[1] + 2.0 * ks[2] + ks[3])
        _check_finite(z)
        states[n + 1 if store else 0] = z
        if with_div:
            logp[n + 1] = logp[n] - (h / 6.0) * (ds[0] + 2.0 * ds[1] + 2.0 * ds[2] + ds[3])
    return Trajectory(states, h, logp)


def suggest_steps(field, points, cfg: IntegratorConfig = IntegratorConfig(), target: float = 0.5,
                  max_steps: int = 4096) -> IntegratorConfig:
    """Raise ``cfg.steps`` until ``|h| * max ||J_V||_2`` over ``points`` is at most ``target``.

    Fixed-step RK4 is accurate only when the step resolves the fastest local
    rate of the field; symmetrized fields can have Jacobians in the hundreds.
    The estimate is taken on the given points (e.g. samples of the period cell
    where the trajectories live), so it is a heuristic, not a bound.
    """
    J = field.evaluate(np.asarray(points, dtype=float).reshape(-1, 2), jacobian=True).jacobian
    L = float(np.max(np.linalg.norm(J, ord=2, axis=(1, 2)), initial=0.0))
    need = int(np.ceil(L * abs(cfg.t1 - cfg.t0) / target))
    steps = int(min(max(cfg.steps, need), max_steps))
    return cfg if steps == cfg.steps else replace(cfg, steps=steps)


def _shape_like(out, q):
    q = np.asarray(q)
    return out[0] if q.ndim == 1 else out


def integrate_forward(field, q, cfg: IntegratorConfig = IntegratorConfig(), return_trajectory: bool = False):
    """``D(q)``: integrate from ``t0`` to ``t1``."""
    tr = _integrate(field, q, cfg.h, cfg.steps, False, store=return_trajectory)
    out = _shape_like(tr.final, q)
    return (out, tr) if return_trajectory else out


def integrate_inverse(field, q, cfg: IntegratorConfig = IntegratorConfig(), return_trajectory: bool = False):
    """``D^-1(q)``: integrate from ``t1`` back to ``t0``."""
    tr = _integrate(field, q, -cfg.h, cfg.steps, False, store=return_trajectory)
    out = _shape_like(tr.final, q)
    return (out, tr) if return_trajectory else out


def integrate_with_logdensity(field, q, cfg: IntegratorConfig = IntegratorConfig(), return_trajectory: bool = False,
                              inverse: bool = False):
    """Integrate state and ``d log p / dt = -div V`` together.

    Returns ``(z(t1), delta_logp)`` with ``delta_logp = log p(z(t1)) - log p(z(t0))``,
    i.e. ``-log|det dD/dq|``.
    """
    h = -cfg.h if inverse else cfg.h
    tr = _integrate(field, q, h, cfg.steps, True)
    z = _shape_like(tr.final, q)
    dl = tr.logdet[-1]
    dl = float(dl[0]) if np.asarray(q).ndim == 1 else dl
    return (z, dl, tr) if return_trajectory else (z, dl)


def backprop_trajectory(field, trajectory: Trajectory, output_cotangent=None, logdet_cotangent=None,
                        cfg: IntegratorConfig | None = None, want_inputs: bool = False):
    """Reverse-mode derivative of the discrete RK4 map.

    ``output_cotangent`` is the cotangent of the final state (``(N, 2)``),
    ``logdet_cotangent`` that of the accumulated ``delta_logp`` (scalar or
    ``(N,)``). Returns a :class:`FieldGrad`, or ``(FieldGrad, grad_q)`` when
    ``want_inputs`` is set.
    """
    states = trajectory.states
    if states.ndim != 3 or states.shape[-1] != 2:
        raise ShapeMismatch(f"trajectory states must have shape (steps+1, N, 2), got {states.shape}")
    n_pts = states.shape[1]
    h = trajectory.h
    if cfg is not None:
        if cfg.steps != trajectory.steps:
            raise ShapeMismatch(f"trajectory has {trajectory.steps} steps, config expects {cfg.steps}")
        if not np.isclose(abs(h), abs(cfg.h), rtol=1e-12, atol=0.0):
            raise ShapeMismatch("trajectory step size does not match config")
    a = np.zeros((n_pts, 2))
    if output_cotangent is not None:
        oc = np.asarray(output_cotangent, float)
        if oc.size != n_pts * 2:
            raise ShapeMismatch(f"output cotangent has {oc.size // 2} points, trajectory has {n_pts}")
        a = oc.reshape(n_pts, 2).copy()
    al = None
    if logdet_cotangent is not None:
        al = np.broadcast_to(np.asarray(logdet_cotangent, float), (n_pts,)).copy()
        if trajectory.logdet is None:
            raise ShapeMismatch("logdet cotangent given but trajectory carries no log-density")
        if not np.any(al):
            al = None
    zero = field.backward(states[0][:1], None, None, want_point=False)[1].scaled(0.0)
    total = FieldGrad(np.zeros_like(zero.theta), None if zero.affine is None else np.zeros(4))
    if al is None and not np.any(a):
        return (total, a) if want_inputs else total
    for n in range(trajectory.steps - 1, -1, -1):
        z = states[n]
        # recompute stage points
        zs = [z]
        zi = z
        for i in range(3):
            k = field.evaluate(zi).value
            zi = z + (h if i == 2 else 0.5 * h) * k
            zs.append(zi)
        gk = [(h * w / 6.0) * a for w in _W]
        gd = [None if al is None else (-h * w / 6.0) * al for w in _W]
        gz_sum = np.zeros_like(a)
        for i in range(3, -1, -1):
            gz, g = field.backward(zs[i], gk[i], gd[i], want_point=True)
            total = total + g
            gz_sum += gz
            if i > 0:
                gk[i - 1] = gk[i - 1] + (h if i == 3 else 0.5 * h) * gz
        a = a + gz_sum
    return (total, a) if want_inputs else total

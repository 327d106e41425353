"""Escherization: fit a tiling template to a silhouette through a constrained flow.

The tile is ``D(A(T))`` where ``A`` is a similarity and ``D`` the flow of a
symmetrized field conjugated by ``A``. Occupancy of a world point ``q`` is
predicted as ``sigmoid(tau * phi(D^-1(q)))`` with ``phi`` the signed distance
to ``A(T)``; the loss is its binary cross-entropy against the target mask.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import EmptyForeground, NonFiniteState, OptimizationAborted, UnsupportedFormat
from .field import FieldGrad, FourierParams, SymmetrizedField
from .flow import IntegratorConfig, Trajectory, backprop_trajectory, integrate_inverse
from .geom import AffineMap, Grid, Polygon, polygon_sdf, rasterize_metrics, rasterize_polygon
from .isohedral import (
    IsohedralClass,
    TemplateTile,
    build_class_field,
    default_template,
    deform_tile,
    verify_tiling,
)
from .optim import AdamState, adam_step, lr_schedule
from .report import RunReport, Stopwatch

log = logging.getLogger(__name__)

BCE_FLOOR = 1e-7
_JROT = np.array([[0.0, -1.0], [1.0, 0.0]])


# --------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class TargetShape:
    """Binary occupancy raster placed in the plane."""

    mask: np.ndarray
    grid: Grid

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2 or m.shape != tuple(self.grid.shape):
            raise ValueError("mask shape does not match its grid")
        if not m.any():
            raise EmptyForeground("target mask has no foreground pixels")
        if not self.grid.pixel_size > 0:
            raise ValueError("pixel size must be positive")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def area_fraction(self) -> float:
        return float(self.mask.mean())

    @property
    def foreground_area(self) -> float:
        return float(self.mask.sum()) * self.grid.pixel_size**2

    @property
    def n_foreground(self) -> int:
        return int(self.mask.sum())

    def foreground_points(self) -> np.ndarray:
        return self.grid.pixel_centers()[self.mask.ravel()]

    @property
    def centroid(self) -> np.ndarray:
        return self.foreground_points().mean(axis=0)

    def foreground_bbox(self):
        pts = self.foreground_points()
        h = 0.5 * self.grid.pixel_size
        lo, hi = pts.min(axis=0) - h, pts.max(axis=0) + h
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def sampling_domain(self, pad: float = 0.10):
        """Foreground bounding box padded by ``pad`` of its size on each side."""
        x0, y0, x1, y1 = self.foreground_bbox()
        dx, dy = pad * (x1 - x0), pad * (y1 - y0)
        return x0 - dx, y0 - dy, x1 + dx, y1 + dy


def target_from_mask(mask, extent: float = 4.0) -> TargetShape:
    """Place a boolean mask (row 0 at the top) so its longer side spans ``extent`` units, centred at 0."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    px = extent / max(h, w)
    return TargetShape(mask, Grid((h, w), (-0.5 * w * px, -0.5 * h * px), px))


def target_from_polygon(poly: Polygon, resolution: int = 256, pad: float = 0.15) -> TargetShape:
    """Rasterize a world-space polygon on a square grid around it (coordinates are kept)."""
    x0, y0, x1, y1 = poly.bbox()
    side = max(x1 - x0, y1 - y0) * (1 + 2 * pad)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    grid = Grid((resolution, resolution), (cx - side / 2, cy - side / 2), side / resolution)
    return TargetShape(rasterize_polygon(poly, grid), grid)


def _decode_image(data: bytes, fmt: str | None):
    from PIL import Image, UnidentifiedImageError

    magic = data[:2]
    kind = (fmt or "").lower().lstrip(".")
    if not kind:
        if magic in (b"P2", b"P5"):
            kind = "pgm"
        elif data[:8] == b"\x89PNG\r\n\x1a\n":
            kind = "png"
        else:
            raise UnsupportedFormat("unrecognised image data (expected PGM P2/P5 or PNG)")
    if kind == "pgm" and magic not in (b"P2", b"P5"):
        raise UnsupportedFormat("only PGM variants P2 and P5 are supported")
    if kind not in ("pgm", "png"):
        raise UnsupportedFormat(f"unsupported format {fmt!r}")
    try:
        im = Image.open(io.BytesIO(data))
        im.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UnsupportedFormat(f"could not decode {kind.upper()} data: {exc}") from exc
    if kind == "png" and im.format != "PNG":
        raise UnsupportedFormat("data is not a PNG image")
    if im.mode in ("I;16", "I;16B", "I;16L", "I"):
        a = np.asarray(im, dtype=float)
        maxval = 65535.0 if a.max() > 255 else 255.0
        if kind == "pgm":
            maxval = float(_pgm_maxval(data) or maxval)
        return a / maxval
    if im.mode in ("RGBA", "LA", "P"):
        im = im.convert("RGBA")
        bg = Image.new("RGBA", im.size, (255, 255, 255, 255))
        im = Image.alpha_composite(bg, im)
    a = np.asarray(im.convert("L"), dtype=float)
    if kind == "pgm":
        mv = _pgm_maxval(data)
        if mv and mv < 255 and a.max() <= mv:
            return a / mv
    return a / 255.0


def _pgm_maxval(data: bytes):
    toks = []
    for line in data[:512].split(b"\n"):
        line = line.split(b"#", 1)[0]
        toks.extend(line.split())
        if len(toks) >= 4:
            break
    try:
        return int(toks[3])
    except (IndexError, ValueError):
        return None


def load_target(data, fmt: str | None = None, extent: float = 4.0, threshold: float = 0.5,
                invert: bool = False) -> TargetShape:
    """Load a silhouette from PGM (P2/P5) or grayscale PNG bytes (or a path).

    Dark pixels (normalised gray < ``threshold``) are foreground unless
    ``invert`` is set.
    """
    if isinstance(data, (str, Path)):
        path = Path(data)
        fmt = fmt or path.suffix
        data = path.read_bytes()
    gray = _decode_image(bytes(data), fmt)
    mask = gray < threshold
    if invert:
        mask = ~mask
    if not mask.any():
        raise EmptyForeground("image has no foreground pixels")
    return target_from_mask(mask, extent)


@dataclass
class OccupancySamples:
    q: np.ndarray
    o: np.ndarray

    def __len__(self):
        return len(self.q)


def sample_target(target: TargetShape, n: int, rng=None, pad: float = 0.10) -> OccupancySamples:
    """``n`` uniform points over the padded foreground box with nearest-pixel labels."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(rng)
    x0, y0, x1, y1 = target.sampling_domain(pad)
    q = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    o = target.grid.lookup(target.mask, q).astype(float)
    return OccupancySamples(q, o)


# --------------------------------------------------------------------------
# loss


def _bce(z, o):
    """Clamped BCE of ``sigmoid(z)`` and its derivative w.r.t. ``z`` (zero where clamped)."""
    p = 0.5 * (1.0 + np.tanh(0.5 * z))
    pc = np.clip(p, BCE_FLOOR, 1.0 - BCE_FLOOR)
    loss = -(o * np.log(pc) + (1.0 - o) * np.log1p(-pc))
    dz = np.where((p > BCE_FLOOR) & (p < 1.0 - BCE_FLOOR), p - o, 0.0)
    return loss, dz


def _sdf_terms(template: TemplateTile, A: AffineMap, x):
    """World SDF ``s * phi_T(A^-1 x)``, its x-gradient and parameter gradient rows."""
    y = A.apply_inverse(x)
    phiT, gT = polygon_sdf(template.polygon, y, return_grad=True)
    s = A.scale
    R = A.linear / s
    phi = s * phiT
    gx = gT @ R.T
    # d phi / d(angle, scale, tx, ty)
    da = -s * np.sum(gT * (y @ _JROT.T), axis=1)
    ds = phiT - np.sum(gT * y, axis=1)
    dt = -gx
    dparams = np.column_stack([da, ds, dt])
    return phi, gx, dparams


def occupancy_loss(samples: OccupancySamples, field: SymmetrizedField, template: TemplateTile, tau: float,
                   cfg: IntegratorConfig = IntegratorConfig(), need_grad: bool = True, need_theta: bool = True):
    """Mean clamped BCE of ``sigmoid(tau * phi(D^-1(q)))`` against ``o``.

    Returns ``(loss, FieldGrad)``; the affine part of the gradient is w.r.t.
    ``(angle, scale, tx, ty)``. With zero coefficients the flow is the
    identity and the integration is skipped.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    q, o = samples.q, samples.o
    n = len(q)
    A = field.affine or AffineMap.identity()
    identity = not np.any(field.params.coefficients)
    if identity:
        x = q
        traj = Trajectory(np.broadcast_to(q, (cfg.steps + 1,) + q.shape), -cfg.h)
    else:
        x, traj = integrate_inverse(field, q, cfg, return_trajectory=True)
    phi, gx, dpar = _sdf_terms(template, A, x)
    bce, dz = _bce(tau * phi, o)
    loss = float(bce.mean())
    if not need_grad:
        return loss, None
    gphi = tau * dz / n
    g_aff = gphi @ dpar
    if need_theta:
        g = backprop_trajectory(field, traj, gphi[:, None] * gx, None, cfg)
        theta = g.theta
        if g.affine is not None:
            g_aff = g_aff + g.affine
    else:
        theta = np.zeros(field.params.shape)
    return loss, FieldGrad(theta, g_aff)


# --------------------------------------------------------------------------
# optimisation


@dataclass
class EscherConfig:
    cls: str = "IH1"
    omega1: int = 5
    omega2: int = 5
    tau: float = 10.0
    tau_schedule: str = "constant"  # or "linear_ramp" (tau_start -> tau_end)
    tau_start: float = 2.0
    tau_end: float = 20.0
    n_samples: int = 2048
    eval_samples: int = 4096
    eval_every: int = 25
    iters_affine: int = 500
    iters_flow: int = 2000
    lr_affine: float = 1e-2
    lr_flow: float = 3e-3
    restarts: int = 8
    steps: int = 32
    t0: float = 0.0
    t1: float = 1.0
    seed: int = 0
    samples_per_edge: int = 64
    affine_mode: str = "conjugate"
    max_retries: int = 3

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.t0, self.t1, self.steps)

    def tau_at(self, it: int, horizon: int) -> float:
        if self.tau_schedule == "constant":
            return self.tau
        return lr_schedule("linear_ramp", it, self.tau_start, self.tau_end, horizon)

    def validate(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        for k in ("n_samples", "eval_samples", "restarts", "steps", "samples_per_edge"):
            if getattr(self, k) < 1:
                raise ValueError(f"{k} must be >= 1")
        if self.omega1 < 0 or self.omega2 < 0:
            raise ValueError("frequencies must be non-negative")
        if self.iters_affine < 0 or self.iters_flow < 0:
            raise ValueError("iteration counts must be non-negative")
        IsohedralClass.parse(self.cls)
        return self


def _streams(seed: int):
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(4)]


def initial_affine(target: TargetShape, template: TemplateTile, angle: float = 0.0) -> AffineMap:
    """Area-matching scale, centroid-matching translation."""
    s = math.sqrt(target.foreground_area / template.polygon.area)
    R = s * np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    t = target.centroid - R @ template.polygon.centroid
    return AffineMap(angle, s, t)


def _affine_loss(samples, template, A: AffineMap, tau):
    phi, _, dpar = _sdf_terms(template, A, samples.q)
    bce, dz = _bce(tau * phi, samples.o)
    g = (tau * dz / len(samples.q)) @ dpar
    return float(bce.mean()), g


def affine_phase(target: TargetShape, template: TemplateTile, cls=None, config: EscherConfig = EscherConfig(),
                 trace: list | None = None) -> AffineMap:
    """Best-of-restarts similarity fit with the flow frozen at the identity.

    Optimises ``(angle, log scale, tx, ty)`` with Adam; restarts start from
    evenly spaced angles. Each restart keeps its best iterate on a fixed
    evaluation set and the best restart wins.
    """
    rng_batch, rng_eval, _, _ = _streams(config.seed)
    evalset = sample_target(target, config.eval_samples, rng_eval)
    best = (math.inf, None)
    for r in range(config.restarts):
        A0 = initial_affine(target, template, 2 * math.pi * r / config.restarts)
        w = np.array([A0.angle, math.log(A0.scale), *A0.translation])
        st = AdamState.init(w, lr=config.lr_affine)
        cand_loss, _ = _affine_loss(evalset, template, A0, config.tau)
        cand = (cand_loss, w.copy())
        for it in range(config.iters_affine):
            A = AffineMap(w[0], math.exp(w[1]), w[2:])
            batch = sample_target(target, config.n_samples, rng_batch)
            tau = config.tau_at(it, config.iters_affine)
            loss, g = _affine_loss(batch, template, A, tau)
            g = g.copy()
            g[1] *= A.scale  # d/d log s
            st, w = adam_step(st, w, g)
            if trace is not None:
                trace.append(loss)
            if (it + 1) % config.eval_every == 0 or it + 1 == config.iters_affine:
                el, _ = _affine_loss(evalset, template, AffineMap(w[0], math.exp(w[1]), w[2:]), config.tau)
                if el < cand[0]:
                    cand = (el, w.copy())
        log.debug("affine restart %d: eval loss %.5f", r, cand[0])
        if cand[0] < best[0]:
            best = cand
    w = best[1]
    return AffineMap(w[0], math.exp(w[1]), w[2:])


def embed_params(params: FourierParams, omega1: int, omega2: int | None = None) -> FourierParams:
    """Zero-pad coefficients to higher maximum frequencies; the field is unchanged."""
    omega2 = omega1 if omega2 is None else omega2
    c = params.coefficients
    if omega1 + 1 < c.shape[2] or omega2 + 1 < c.shape[3]:
        raise ValueError("cannot embed into a smaller frequency range")
    out = np.zeros((2, 4, omega1 + 1, omega2 + 1))
    out[:, :, : c.shape[2], : c.shape[3]] = c
    return FourierParams(out)


@dataclass
class FlowPhaseResult:
    params: FourierParams
    trace: list[float]
    eval_trace: list[tuple[int, float]]
    best_eval_loss: float
    initial_eval_loss: float
    retries: int


def flow_phase(target: TargetShape, template: TemplateTile, cls=None, affine: AffineMap | None = None,
               config: EscherConfig = EscherConfig(), init: FourierParams | None = None) -> FlowPhaseResult:
    """Adam on the coefficients from zero (identity deformation); keeps the best iterate on a fixed eval set."""
    affine = AffineMap.identity() if affine is None else affine
    cfg = config.integrator
    _, rng_eval, rng_batch, _ = _streams(config.seed)
    evalset = sample_target(target, config.eval_samples, rng_eval)
    theta0 = np.zeros((2, 4, config.omega1 + 1, config.omega2 + 1)) if init is None else init.coefficients
    sf = build_class_field(FourierParams(theta0), template, affine=affine, affine_mode=config.affine_mode)
    init_loss, _ = occupancy_loss(evalset, sf, template, config.tau, cfg, need_grad=False)
    best_loss, best_theta = init_loss, theta0.copy()
    theta = theta0.copy()
    lr = config.lr_flow
    st = AdamState.init(theta, lr=lr)
    trace, eval_trace = [], [(0, init_loss)]
    retries = 0
    it = 0
    while it < config.iters_flow:
        try:
            batch = sample_target(target, config.n_samples, rng_batch)
            tau = config.tau_at(it, config.iters_flow)
            f = sf.with_params(theta)
            loss, g = occupancy_loss(batch, f, template, tau, cfg)
            if not np.all(np.isfinite(g.theta)):
                raise NonFiniteState("non-finite gradient")
            st, theta_new = adam_step(st, theta, g.theta)
            if not np.all(np.isfinite(theta_new)):
                raise NonFiniteState("non-finite coefficients")
            theta = theta_new
            trace.append(loss)
            it += 1
            if it % config.eval_every == 0 or it == config.iters_flow:
                el, _ = occupancy_loss(evalset, sf.with_params(theta), template, config.tau, cfg, need_grad=False)
                eval_trace.append((it, el))
                if el < best_loss:
                    best_loss, best_theta = el, theta.copy()
        except NonFiniteState as exc:
            retries += 1
            if retries > config.max_retries:
                raise OptimizationAborted(
                    f"flow phase diverged at iteration {it} after {config.max_retries} learning-rate halvings: {exc}"
                ) from exc
            lr *= 0.5
            log.warning("non-finite state at iteration %d; retrying with lr=%.3g", it, lr)
            theta = best_theta.copy()
            st = AdamState.init(theta, lr=lr)
    return FlowPhaseResult(FourierParams(best_theta), trace, eval_trace, best_loss, init_loss, retries)


@dataclass
class EscherResult:
    template: TemplateTile
    affine: AffineMap
    params: FourierParams
    field: SymmetrizedField
    tile: Polygon
    iou: float
    pixel_accuracy: float
    tiling: dict
    affine_trace: list[float]
    flow: FlowPhaseResult
    report: RunReport


def escherize(target: TargetShape, cls=None, config: EscherConfig = EscherConfig(), template: TemplateTile | None = None,
              affine: AffineMap | None = None, verify_samples: int = 20000,
              init: FourierParams | None = None) -> EscherResult:
    """Affine phase, flow phase, deformation, metrics and the tiling check."""
    cls = IsohedralClass.parse(cls or config.cls)
    config = replace(config, cls=cls.value).validate()
    sw = Stopwatch()
    template = template or default_template(cls)
    notes = []
    if target.n_foreground < 10:
        notes.append(f"degenerate target: only {target.n_foreground} foreground pixels")
    aff_trace: list[float] = []
    if affine is None:
        affine = affine_phase(target, template, cls, config, aff_trace)
    fr = flow_phase(target, template, cls, affine, config, init=init)
    sf = build_class_field(fr.params, template, affine=affine, affine_mode=config.affine_mode)
    size = template.polygon.diameter * affine.scale
    tile = deform_tile(template, sf, config.integrator, config.samples_per_edge, max_chord=0.05 * size,
                       tol=1e-4 * size, max_points=100_000, auto_steps=0.5)
    iou, acc = rasterize_metrics(tile, target.mask, target.grid)
    rep = verify_tiling(tile, cls, template, affine=affine, n_samples=verify_samples, rng=config.seed)
    if not rep.passed:
        notes.append("tiling verification failed")
    report = RunReport(
        kind="escherize",
        config=asdict(config),
        seed=config.seed,
        trace=list(aff_trace) + list(fr.trace),
        metrics={
            "iou": iou,
            "pixel_accuracy": acc,
            "affine": affine.as_vector().tolist(),
            "affine_iterations": len(aff_trace),
            "flow_iterations": len(fr.trace),
            "eval_loss_initial": fr.initial_eval_loss,
            "eval_loss_best": fr.best_eval_loss,
            "eval_trace": [list(e) for e in fr.eval_trace],
            "lr_retries": fr.retries,
            "tiling": rep.as_dict(),
            "class": cls.value,
            "group": cls.group_tag,
        },
        wall_time=sw.elapsed(),
        tiling_valid=rep.passed,
        notes=notes,
    )
    return EscherResult(template, affine, fr.params, sf, tile, iou, acc, rep.as_dict(), aff_trace, fr, report)


def render_tile(tile: Polygon, target: TargetShape) -> np.ndarray:
    """Tile occupancy on the target grid as a [0, 1] image (tile black on white)."""
    return 1.0 - rasterize_polygon(tile, target.grid).astype(float)

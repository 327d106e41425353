"""Density estimation on the torus, sphere, Klein bottle and projective plane.

Each space is the quotient of the plane by a crystallographic group whose
fundamental domain is the unit square. A flow of a field that is
equivariant under that group descends to the quotient, so

    log p(x) = log q0(P(D(x))) + int_0^1 div V(z(t)) dt

is a normalised density on the canonical square (``P`` is the canonical
projection, ``q0`` a product of von Mises densities).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import i0e, logsumexp

from .errors import NonFiniteState, OptimizationAborted
from .field import BasisConjugation, FourierParams, RotationSym, SymmetrizedField, TransflectionSym
from .flow import IntegratorConfig, backprop_trajectory, integrate_with_logdensity
from .geom import Line
from .optim import AdamState, adam_step, lr_schedule
from .report import RunReport, Stopwatch

log = logging.getLogger(__name__)

TARGET_LOG_FLOOR = -30.0


class IdentSpace(enum.Enum):
    TORUS = "torus"
    SPHERE = "sphere"
    KLEIN = "klein"
    PROJECTIVE = "projective"

    @classmethod
    def parse(cls, name) -> "IdentSpace":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"kleinbottle": "klein", "klein_bottle": "klein", "projectiveplane": "projective",
                   "projective_plane": "projective", "rp2": "projective"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown identification space {name!r}") from None

    @property
    def basis(self) -> np.ndarray:
        return {
            IdentSpace.TORUS: np.eye(2),
            IdentSpace.SPHERE: 2.0 * np.eye(2),
            IdentSpace.KLEIN: np.diag([1.0, 2.0]),
            IdentSpace.PROJECTIVE: 2.0 * np.eye(2),
        }[self]

    def ops(self) -> list:
        """Symmetry operators, innermost first."""
        B = BasisConjugation(self.basis)
        if self is IdentSpace.TORUS:
            return [B]
        if self is IdentSpace.SPHERE:
            return [B, RotationSym([1.0, 1.0], 4)]
        if self is IdentSpace.KLEIN:
            return [B, TransflectionSym(Line([0.5, 0.0], [0.0, 1.0]), 1.0)]
        g1 = TransflectionSym(Line([0.0, 0.5], [1.0, 0.0]), 1.0)
        g2 = TransflectionSym(Line([0.5, 0.0], [0.0, 1.0]), 1.0)
        return [B, g2, g1]


class _Projector:
    """Lattice reduction followed by the inverse coset map of the containing unit sub-square."""

    def __init__(self, space: IdentSpace):
        sf = SymmetrizedField(FourierParams.zeros(0), space.ops())
        self.group = sf.canonical_group
        B = self.group.basis
        self.cells = np.round(np.diag(B)).astype(int)
        self.inv = {}
        for g in self.group.cosets:
            c = self.group.reduce_point(g.apply(np.array([0.5, 0.5])))
            key = (int(math.floor(c[0])), int(math.floor(c[1])))
            gi = g.inverse()
            self.inv[key] = gi
        n_sub = int(np.prod(self.cells))
        if len(self.inv) != n_sub:
            raise RuntimeError("coset images do not tile the lattice cell by unit squares")

    def __call__(self, p, return_linear: bool = False):
        p = np.array(p, dtype=float).reshape(-1, 2)
        lin = np.broadcast_to(np.eye(2), (len(p), 2, 2)).copy()
        per = self.cells.astype(float)
        for _ in range(6):
            p = self._reduce(p, per)
            key = np.floor(p).astype(int)
            key = np.minimum(key, self.cells - 1)
            # the closed unit square is canonical; an edge point may otherwise cycle between copies
            key[np.all(p <= 1.0, axis=1)] = 0
            done = np.all(key == 0, axis=1)
            if np.all(done):
                break
            for (i, j), gi in self.inv.items():
                if i == 0 and j == 0:
                    continue
                sel = (key[:, 0] == i) & (key[:, 1] == j)
                if np.any(sel):
                    p[sel] = gi.apply(p[sel])
                    lin[sel] = gi.linear @ lin[sel]
        return (p, lin) if return_linear else p

    @staticmethod
    def _reduce(p, per):
        p = p - np.floor(p / per) * per
        # -tiny + per rounds to per itself
        return np.where(p >= per, p - per, p)


_PROJECTORS: dict = {}


def _projector(space: IdentSpace) -> _Projector:
    if space not in _PROJECTORS:
        _PROJECTORS[space] = _Projector(space)
    return _PROJECTORS[space]


def coset_representatives(space) -> list:
    return list(_projector(IdentSpace.parse(space)).group.cosets)


def canonical_projection(space, p, return_linear: bool = False):
    """Map plane points to their orbit representative in the canonical square ``[0,1)^2``.

    Points on identified edges are a measure-zero set for which the
    representative may land on the closed edge ``x = 1`` or ``y = 1``.
    With ``return_linear`` also returns the linear part of the applied
    isometry (for chain rules).
    """
    space = IdentSpace.parse(space)
    single = np.asarray(p).ndim == 1
    q, lin = _projector(space)(p, True)
    if single:
        return (q[0], lin[0]) if return_linear else q[0]
    return (q, lin) if return_linear else q


def build_space_field(params: FourierParams, space) -> SymmetrizedField:
    return SymmetrizedField(params, IdentSpace.parse(space).ops())


# --------------------------------------------------------------------------
# densities


def log_i0(kappa: float) -> float:
    return float(np.log(i0e(kappa)) + abs(kappa))


def base_log_density(p, kappa: float, space=None):
    """Product of von Mises densities (mean pi on the angles 2 pi x, 2 pi y) w.r.t. the unit square."""
    p = np.asarray(p, dtype=float)
    if kappa == 0:
        return np.zeros(p.shape[:-1]) if p.ndim > 1 else 0.0
    val = np.sum(-kappa * np.cos(2 * np.pi * p), axis=-1) - 2.0 * log_i0(kappa)
    return val if p.ndim > 1 else float(val)


def base_log_density_grad(p, kappa: float):
    return 2 * np.pi * kappa * np.sin(2 * np.pi * np.asarray(p, dtype=float))


@dataclass
class DensityModel:
    field: SymmetrizedField
    space: IdentSpace
    kappa: float = 0.0
    cfg: IntegratorConfig = IntegratorConfig()

    def with_params(self, theta) -> "DensityModel":
        return replace(self, field=self.field.with_params(theta))


def make_model(space, omega: int = 5, kappa: float | None = None, cfg: IntegratorConfig = IntegratorConfig(),
               params: FourierParams | None = None) -> DensityModel:
    space = IdentSpace.parse(space)
    if kappa is None:
        kappa = default_kappa(space)
    params = FourierParams.zeros(omega) if params is None else params
    return DensityModel(build_space_field(params, space), space, kappa, cfg)


def default_kappa(space) -> float:
    return 2.0 if IdentSpace.parse(space) is IdentSpace.TORUS else 0.0


def model_log_density(model: DensityModel, x, return_trajectory: bool = False):
    """``log q0(P(D(x))) + int div``; the sign makes the density integrate to one."""
    x = np.asarray(x, dtype=float)
    pts = x.reshape(-1, 2)
    z, dl, tr = integrate_with_logdensity(model.field, pts, model.cfg, return_trajectory=True)
    zc, lin = canonical_projection(model.space, z, return_linear=True)
    val = base_log_density(zc, model.kappa) - dl
    if x.ndim == 1:
        val = float(val[0])
    if return_trajectory:
        return val, (tr, zc, lin)
    return val


def stiffness(model: DensityModel, probe: int = 32) -> float:
    """``h * max ||J_V||_2`` on a ``probe x probe`` grid of the field's lattice cell."""
    u = (np.arange(probe) + 0.5) / probe
    pts = np.stack(np.meshgrid(u, u), -1).reshape(-1, 2) * _projector(model.space).cells
    J = model.field.evaluate(pts, jacobian=True).jacobian
    return float(np.max(np.linalg.norm(J, ord=2, axis=(1, 2)))) * abs(model.cfg.h)


def nll_and_grad(model: DensityModel, x):
    """Mean negative log-likelihood and its coefficient gradient."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    n = len(x)
    ll, (tr, zc, lin) = model_log_density(model, x, return_trajectory=True)
    loss = -float(np.mean(ll))
    out_cot = None
    if model.kappa != 0:
        gb = base_log_density_grad(zc, model.kappa)
        out_cot = -np.einsum("nji,nj->ni", lin, gb) / n
    g = backprop_trajectory(model.field, tr, out_cot, np.full(n, 1.0 / n), model.cfg)
    return loss, g.theta


def density_grid(model: DensityModel, resolution: int = 64, chunk: int = 8192) -> np.ndarray:
    """``exp(log p)`` at pixel centres of the canonical square; row 0 is the top (y near 1)."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    c = (np.arange(resolution) + 0.5) / resolution
    X, Y = np.meshgrid(c, c[::-1])
    pts = np.column_stack([X.ravel(), Y.ravel()])
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        out[s:s + chunk] = np.exp(model_log_density(model, pts[s:s + chunk]))
    return out.reshape(resolution, resolution)


# --------------------------------------------------------------------------
# targets


class TargetDistribution(enum.Enum):
    FOUR_GAUSSIAN = "4g"
    SIX_GAUSSIAN = "6g"
    CHECKERBOARD = "checker"

    @classmethod
    def parse(cls, name) -> "TargetDistribution":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        aliases = {"fourgaussian": "4g", "four_gaussian": "4g", "sixgaussian": "6g", "six_gaussian": "6g",
                   "checkerboard": "checker", "checkerboard5x5": "checker"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown target distribution {name!r}") from None


@dataclass(frozen=True)
class Target:
    kind: TargetDistribution
    sigma: float = 0.05
    wraps: int = 3

    @property
    def means(self) -> np.ndarray:
        if self.kind is TargetDistribution.FOUR_GAUSSIAN:
            return np.array([[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])
        if self.kind is TargetDistribution.SIX_GAUSSIAN:
            a = np.arange(6) * np.pi / 3
            return 0.5 + 0.3 * np.column_stack([np.cos(a), np.sin(a)])
        raise AttributeError("checkerboard has no component means")

    def black_cells(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(5), np.arange(5), indexing="ij")
        keep = (i + j) % 2 == 0
        return np.column_stack([i[keep], j[keep]])

    def sample(self, n: int, rng=None) -> np.ndarray:
        if n < 1:
            raise ValueError("need at least one sample")
        rng = np.random.default_rng(rng)
        if self.kind is TargetDistribution.CHECKERBOARD:
            cells = self.black_cells()
            c = cells[rng.integers(len(cells), size=n)]
            return (c + rng.random((n, 2))) / 5.0
        mu = self.means
        k = rng.integers(len(mu), size=n)
        x = mu[k] + self.sigma * rng.standard_normal((n, 2))
        return x - np.floor(x)

    def log_density(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        pts = p.reshape(-1, 2)
        if self.kind is TargetDistribution.CHECKERBOARD:
            ij = np.clip(np.floor(5 * pts).astype(int), 0, 4)
            black = (ij[:, 0] + ij[:, 1]) % 2 == 0
            out = np.where(black, math.log(25 / 13), TARGET_LOG_FLOOR)
        else:
            mu = self.means
            w = np.arange(-self.wraps, self.wraps + 1)
            # per component, per coordinate wrapped normal
            d = pts[:, None, :, None] - mu[None, :, :, None] + w[None, None, None, :]
            lg = -0.5 * (d / self.sigma) ** 2 - math.log(self.sigma * math.sqrt(2 * math.pi))
            lc = logsumexp(lg, axis=-1).sum(axis=-1)  # (n, K)
            out = logsumexp(lc, axis=1) - math.log(len(mu))
        return out.reshape(p.shape[:-1]) if p.ndim > 1 else float(out[0])


def sample_distribution(dist, n: int, rng=None, sigma: float = 0.05) -> np.ndarray:
    return Target(TargetDistribution.parse(dist), sigma).sample(n, rng)


def target_log_density(dist, p, sigma: float = 0.05):
    return Target(TargetDistribution.parse(dist), sigma).log_density(p)


def kl_estimate(model: DensityModel, target: Target, n: int = 4096, rng=None, chunk: int = 4096):
    """Monte-Carlo ``KL(target || model)`` with its standard error."""
    x = target.sample(n, rng)
    lm = np.concatenate([model_log_density(model, x[s:s + chunk]) for s in range(0, n, chunk)])
    diff = target.log_density(x) - lm
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(n))


# --------------------------------------------------------------------------
# training


@dataclass
class DensityConfig:
    space: str = "torus"
    target: str = "4g"
    omega: int = 5
    kappa: float | None = None
    sigma: float = 0.05
    iters: int = 5000
    batch: int = 256
    lr: float = 1e-3
    lr_final: float = 1e-4
    schedule: str = "linear_ramp"
    steps: int = 16
    # coefficients are rescaled after each step so that h * max ||J_V|| stays below this
    stiffness_cap: float | None = 1.0
    seed: int = 0
    kl_samples: int = 4096
    kl_every: int = 250
    grid_resolution: int = 64
    max_retries: int = 3

    def validate(self):
        IdentSpace.parse(self.space)
        TargetDistribution.parse(self.target)
        if self.omega < 0 or self.iters < 0 or self.batch < 1 or self.steps < 1:
            raise ValueError("invalid density configuration")
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        if self.stiffness_cap is not None and self.stiffness_cap <= 0:
            raise ValueError("stiffness_cap must be positive")
        return self

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(0.0, 1.0, self.steps)


@dataclass
class DensityResult:
    model: DensityModel
    trace: list[float]
    kl_trace: list[tuple[int, float, float]]
    kl: float
    kl_stderr: float
    best_kl_trace: list[float]
    grid: np.ndarray
    normalization: float
    report: RunReport


def train_density(space=None, dist=None, config: DensityConfig = DensityConfig()) -> DensityResult:
    """Adam on the mean NLL of target samples; tracks a Monte-Carlo KL on a fixed sample set."""
    sw = Stopwatch()
    config = replace(config, space=IdentSpace.parse(space or config.space).value,
                     target=TargetDistribution.parse(dist or config.target).value).validate()
    sp = IdentSpace.parse(config.space)
    tgt = Target(TargetDistribution.parse(config.target), config.sigma)
    kappa = default_kappa(sp) if config.kappa is None else config.kappa
    model = make_model(sp, config.omega, kappa, config.integrator)
    ss = np.random.SeedSequence(config.seed)
    rng_batch, rng_kl = (np.random.default_rng(s) for s in ss.spawn(2))
    kl_fixed = tgt.sample(config.kl_samples, rng_kl)
    tl_fixed = tgt.log_density(kl_fixed)

    def kl_of(m):
        lm = model_log_density(m, kl_fixed)
        d = tl_fixed - lm
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d)))

    theta = model.field.params.coefficients.copy()
    kl0, se0 = kl_of(model)
    best = (kl0, theta.copy(), se0)
    kl_trace = [(0, kl0, se0)]
    best_trace = [kl0]
    lr_scale = 1.0
    st = AdamState.init(theta, lr=config.lr)
    trace: list[float] = []
    retries = 0
    it = 0
    while it < config.iters:
        lr = lr_scale * (config.lr if config.schedule == "constant"
                         else lr_schedule("linear_ramp", it, config.lr, config.lr_final, config.iters))
        try:
            x = tgt.sample(config.batch, rng_batch)
            loss, g = nll_and_grad(model.with_params(theta), x)
            if not (np.isfinite(loss) and np.all(np.isfinite(g))):
                raise NonFiniteState("non-finite loss or gradient")
            st, theta = adam_step(st, theta, g, lr=lr)
            if config.stiffness_cap is not None:
                # the field is linear in theta, so rescaling bounds the stiffness exactly on the probe
                k = stiffness(model.with_params(theta))
                if k > config.stiffness_cap:
                    theta = theta * (config.stiffness_cap / k)
            trace.append(loss)
            it += 1
            if it % config.kl_every == 0 or it == config.iters:
                kl, se = kl_of(model.with_params(theta))
                kl_trace.append((it, kl, se))
                if kl < best[0]:
                    best = (kl, theta.copy(), se)
                best_trace.append(best[0])
        except NonFiniteState as exc:
            retries += 1
            if retries > config.max_retries:
                raise OptimizationAborted(f"density training diverged at iteration {it}: {exc}") from exc
            lr_scale *= 0.5
            theta = best[1].copy()
            st = AdamState.init(theta, lr=config.lr)
            log.warning("non-finite state at iteration %d; learning rate scaled by %.3g", it, lr_scale)
    model = model.with_params(best[1])
    grid = density_grid(model, config.grid_resolution)
    norm = float(grid.mean())
    report = RunReport(
        kind="density",
        config=asdict(config),
        seed=config.seed,
        trace=trace,
        metrics={
            "kl_target_model": best[0],
            "kl_stderr": best[2],
            "kl_initial": kl0,
            "kl_trace": [list(k) for k in kl_trace],
            "best_kl_trace": best_trace,
            "final_nll": trace[-1] if trace else None,
            "normalization": norm,
            "kappa": kappa,
            "lr_retries": retries,
            "stiffness": stiffness(model.with_params(best[1])),
            "space": sp.value,
            "target": tgt.kind.value,
        },
        wall_time=sw.elapsed(),
    )
    return DensityResult(model, trace, kl_trace, best[0], best[2], best_trace, grid, norm, report)

import numpy as np
import pytest

from flowsym.errors import NonFiniteState, ShapeMismatch
from flowsym.field import BasisConjugation, FourierParams, RotationSym, SymmetrizedField
from flowsym.flow import (IntegratorConfig, Trajectory, backprop_trajectory, integrate_forward, integrate_inverse,
                          integrate_with_logdensity, suggest_steps)
from oracles import fd_jacobian, rk4_scalar


def _field(rng, scale=0.05, omega=2):
    return SymmetrizedField(FourierParams.random(omega, scale=scale, rng=rng),
                            [BasisConjugation(2 * np.eye(2)), RotationSym([1.0, 1.0], 4)])


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(steps=0)
    with pytest.raises(ValueError):
        IntegratorConfig(t0=1.0, t1=1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(scheme="euler")
    assert IntegratorConfig(0.0, 2.0, 8).h == 0.25


def test_forward_matches_scalar_rk4(rng):
    sf = _field(rng)
    q = rng.uniform(0, 2, (5, 2))
    z = integrate_forward(sf, q, IntegratorConfig(steps=16))
    ref = np.array([rk4_scalar(lambda p: sf(p[None])[0], p, 1.0, 16) for p in q])
    assert np.allclose(z, ref, atol=1e-13)


def test_single_point_shape(rng):
    sf = _field(rng)
    z = integrate_forward(sf, np.array([0.2, 0.3]))
    assert z.shape == (2,)


def test_inverse_consistency(rng):
    sf = SymmetrizedField(FourierParams.random(2, scale=0.2, rng=rng), [])
    q = rng.uniform(-2, 2, (200, 2))
    cfg = IntegratorConfig(steps=64)
    assert np.abs(integrate_inverse(sf, integrate_forward(sf, q, cfg), cfg) - q).max() <= 1e-5


def test_fourth_order_convergence(rng):
    sf = _field(rng, scale=0.1)
    q = rng.uniform(0, 2, (50, 2))
    ref = integrate_forward(sf, q, IntegratorConfig(steps=1024))
    e1 = np.abs(integrate_forward(sf, q, IntegratorConfig(steps=16)) - ref).max()
    e2 = np.abs(integrate_forward(sf, q, IntegratorConfig(steps=32)) - ref).max()
    assert 12.0 <= e1 / e2 <= 20.0


def test_logdensity_matches_fd_jacobian_determinant(rng):
    sf = _field(rng)
    cfg = IntegratorConfig(steps=64)
    q = rng.uniform(0, 2, (4, 2))
    z, dl = integrate_with_logdensity(sf, q, cfg)
    assert np.allclose(z, integrate_forward(sf, q, cfg))
    for i, p in enumerate(q):
        J = fd_jacobian(lambda x: integrate_forward(sf, x[None], cfg)[0], p, h=1e-5)
        assert np.isclose(-dl[i], np.log(abs(np.linalg.det(J))), atol=1e-5)


def test_inverse_logdensity_cancels(rng):
    sf = _field(rng)
    cfg = IntegratorConfig(steps=64)
    q = rng.uniform(0, 2, (10, 2))
    z, dl = integrate_with_logdensity(sf, q, cfg)
    q2, dl2 = integrate_with_logdensity(sf, z, cfg, inverse=True)
    assert np.allclose(q2, q, atol=1e-6)
    assert np.allclose(dl + dl2, 0.0, atol=1e-6)


def test_backprop_matches_fd(rng):
    sf = _field(rng, omega=1)
    cfg = IntegratorConfig(steps=8)
    q = rng.uniform(0, 2, (6, 2))
    wz = rng.normal(size=(6, 2))
    wl = rng.normal(size=6)
    z, dl, tr = integrate_with_logdensity(sf, q, cfg, return_trajectory=True)
    g, gq = backprop_trajectory(sf, tr, wz, wl, cfg, want_inputs=True)

    def obj(theta=sf.params.coefficients, qq=q):
        f = sf.with_params(FourierParams(theta))
        z_, dl_ = integrate_with_logdensity(f, qq, cfg)
        return np.sum(wz * z_) + np.sum(wl * dl_)

    h = 1e-6
    c = sf.params.coefficients
    for idx in [(0, 0, 0, 1), (1, 2, 1, 1), (0, 3, 1, 0)]:
        e = np.zeros_like(c)
        e[idx] = h
        assert np.isclose(g.theta[idx], (obj(c + e) - obj(c - e)) / (2 * h), rtol=1e-6, atol=1e-8)
    e = np.zeros_like(q)
    e[2, 1] = h
    assert np.isclose(gq[2, 1], (obj(qq=q + e) - obj(qq=q - e)) / (2 * h), rtol=1e-6, atol=1e-8)


def test_backprop_shape_checks(rng):
    sf = _field(rng)
    cfg = IntegratorConfig(steps=4)
    _, tr = integrate_forward(sf, rng.random((3, 2)), cfg, return_trajectory=True)
    with pytest.raises(ShapeMismatch):
        backprop_trajectory(sf, tr, np.ones((4, 2)), None, cfg)
    with pytest.raises(ShapeMismatch):
        backprop_trajectory(sf, tr, np.ones((3, 2)), None, IntegratorConfig(steps=8))
    with pytest.raises(ShapeMismatch):
        backprop_trajectory(sf, tr, None, np.ones(3), cfg)


def test_blowup_raises():
    class Explode:
        def evaluate(self, p, jacobian=False, divergence=False):
            from flowsym.field import FieldEval
            return FieldEval(1e3 * p ** 3, None, np.zeros(len(p)) if divergence else None)

    with pytest.raises(NonFiniteState):
        integrate_forward(Explode(), np.array([[10.0, 10.0]]), IntegratorConfig(steps=4))


def test_suggest_steps_bounds_step_times_rate(rng):
    sf = _field(rng, scale=0.5)
    pts = rng.uniform(0, 2, (1000, 2))
    cfg = suggest_steps(sf, pts, IntegratorConfig(steps=4), target=0.5)
    J = sf.evaluate(pts, jacobian=True).jacobian
    L = np.linalg.norm(J, ord=2, axis=(1, 2)).max()
    assert cfg.steps >= 4 and cfg.h * L <= 0.5 + 1e-12
    # never lowers the requested count
    assert suggest_steps(sf, pts, IntegratorConfig(steps=10_000), max_steps=20_000).steps == 10_000


def test_trajectory_properties():
    tr = Trajectory(np.zeros((5, 3, 2)), 0.25)
    assert tr.steps == 4 and tr.final.shape == (3, 2)

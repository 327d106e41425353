import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from flowsym.field import FourierParams
from flowsym.flow import IntegratorConfig
from flowsym.identspace import (DensityConfig, IdentSpace, Target, TargetDistribution, base_log_density,
                                build_space_field, canonical_projection, coset_representatives, density_grid,
                                kl_estimate, make_model, model_log_density, nll_and_grad, sample_distribution,
                                stiffness, target_log_density, train_density)

SPACES = list(IdentSpace)
pt = st.floats(-20, 20, allow_nan=False)


def test_parse():
    assert IdentSpace.parse("Klein_Bottle") is IdentSpace.KLEIN
    assert IdentSpace.parse("RP2") is IdentSpace.PROJECTIVE
    with pytest.raises(ValueError):
        IdentSpace.parse("mobius")
    assert TargetDistribution.parse("checkerboard") is TargetDistribution.CHECKERBOARD


def test_group_orders():
    assert [len(coset_representatives(s)) for s in SPACES] == [1, 4, 2, 4]


@pytest.mark.parametrize("space", SPACES)
@settings(max_examples=40, deadline=None)
@given(x=pt, y=pt)
def test_projection_lands_in_square_and_is_orbit_invariant(space, x, y):
    p = np.array([[x, y]])
    q = canonical_projection(space, p)
    assert np.all((q >= -1e-12) & (q <= 1 + 1e-12))
    for g in coset_representatives(space):
        B = build_space_field(FourierParams.zeros(0), space).lattice
        q2 = canonical_projection(space, g.apply(p) + B @ np.array([1.0, -1.0]))
        d = np.abs(q2 - q)
        # points on identified edges may land on either copy of the edge
        assert d.max() < 1e-9 or np.any(np.isclose(q, 0, atol=1e-9) | np.isclose(q, 1, atol=1e-9))


def test_projection_is_identity_inside_square(rng):
    p = rng.random((100, 2))
    for s in SPACES:
        assert np.allclose(canonical_projection(s, p), p)


def test_projection_linear_part(rng):
    p = rng.uniform(-3, 3, (50, 2))
    q, lin = canonical_projection("sphere", p, return_linear=True)
    # the linear parts are rotations by multiples of 90 degrees
    assert np.allclose(np.einsum("nij,nkj->nik", lin, lin), np.eye(2))
    eps = 1e-6
    q2 = canonical_projection("sphere", p + [eps, 0.0])
    ok = np.abs(q2 - q).max(axis=1) < 1e-3
    assert np.allclose((q2 - q)[ok] / eps, lin[ok][:, :, 0], atol=1e-5)


def test_base_density_matches_scipy_vonmises():
    y = np.array([[0.5, 0.5], [0.1, 0.7], [0.95, 0.0]])
    for k in (0.5, 1.0, 3.0):
        ref = np.sum(stats.vonmises.logpdf(2 * np.pi * y, k, loc=np.pi) + np.log(2 * np.pi), axis=1)
        assert np.allclose(base_log_density(y, k), ref, atol=1e-12)
    assert np.isclose(base_log_density(np.array([0.5, 0.5]), 1.0), 1.52818, atol=1e-5)
    assert base_log_density(np.array([0.3, 0.3]), 0.0) == 0.0


def test_base_density_integrates_to_one():
    val, _ = integrate.dblquad(lambda y, x: math.exp(base_log_density(np.array([x, y]), 2.0)), 0, 1, 0, 1)
    assert np.isclose(val, 1.0, atol=1e-8)


@pytest.mark.parametrize("kind", list(TargetDistribution))
def test_target_densities_normalised(kind):
    t = Target(kind)
    n = 400
    c = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c, c)
    p = np.column_stack([X.ravel(), Y.ravel()])
    mass = np.exp(t.log_density(p)).mean()
    assert np.isclose(mass, 1.0, atol=2e-3)


def test_target_samples_follow_density(rng):
    x = sample_distribution("4g", 20000, rng=0)
    assert np.all((x >= 0) & (x < 1))
    # a quarter of the mass near each mean
    for m in [[0.25, 0.25], [0.75, 0.75]]:
        assert abs(np.mean(np.linalg.norm(x - m, axis=1) < 0.2) - 0.25) < 0.02
    c = sample_distribution("checker", 5000, rng=1)
    ij = np.floor(5 * c).astype(int)
    assert np.all((ij.sum(axis=1) % 2) == 0)
    assert np.isclose(target_log_density("checker", np.array([0.1, 0.1])), math.log(25 / 13))
    six = Target(TargetDistribution.SIX_GAUSSIAN).means
    assert np.allclose(np.linalg.norm(six - 0.5, axis=1), 0.3)


def test_identity_model_is_base_density():
    m = make_model("torus", 2, kappa=1.0)
    p = np.array([[0.5, 0.5], [0.2, 0.9]])
    assert np.allclose(model_log_density(m, p), base_log_density(p, 1.0))


@pytest.mark.parametrize("space", SPACES)
def test_model_normalised_small_field(space):
    m = make_model(space, 3, params=FourierParams.random(3, scale=0.02, rng=4), cfg=IntegratorConfig(steps=16))
    assert abs(density_grid(m, 128).mean() - 1.0) < 0.02


@pytest.mark.parametrize("space,kappa", [("torus", 2.0), ("sphere", 1.0), ("klein", 0.5), ("projective", 1.0)])
def test_nll_gradient_matches_fd(space, kappa):
    m = make_model(space, 1, kappa=kappa, params=FourierParams.random(1, scale=0.03, rng=1),
                   cfg=IntegratorConfig(steps=8))
    x = sample_distribution("6g", 64, rng=2)
    loss, g = nll_and_grad(m, x)
    c = m.field.params.coefficients
    h = 1e-6
    for idx in [(0, 0, 1, 0), (1, 3, 1, 1), (0, 1, 0, 1), (1, 2, 1, 0)]:
        e = np.zeros_like(c)
        e[idx] = h
        lp, _ = nll_and_grad(m.with_params(FourierParams(c + e)), x)
        lm, _ = nll_and_grad(m.with_params(FourierParams(c - e)), x)
        fd = (lp - lm) / (2 * h)
        assert abs(g[idx] - fd) <= 1e-4 * max(abs(fd), 1e-3)


def test_kl_of_target_against_itself_model_is_positive():
    m = make_model("torus", 1)
    kl, se = kl_estimate(m, Target(TargetDistribution.FOUR_GAUSSIAN), 2000, rng=0)
    assert kl > 0 and se > 0


def test_short_training_decreases_kl():
    cfg = DensityConfig(space="torus", target="4g", omega=2, iters=40, batch=128, steps=8, kl_every=20,
                        kl_samples=1000, grid_resolution=32)
    res = train_density(config=cfg)
    assert res.kl <= res.kl_trace[0][1]
    assert all(b2 <= b1 for b1, b2 in zip(res.best_kl_trace, res.best_kl_trace[1:]))
    assert len(res.trace) == 40 and res.grid.shape == (32, 32)
    assert res.report.metrics["kl_target_model"] == res.kl


def test_stiffness_cap_holds_during_training():
    cfg = DensityConfig(space="sphere", target="4g", omega=3, iters=60, batch=64, steps=4, lr=5e-2, lr_final=5e-2,
                        kl_every=30, kl_samples=500, grid_resolution=16, stiffness_cap=0.5)
    res = train_density(config=cfg)
    assert res.report.metrics["stiffness"] <= 0.5 * (1 + 1e-9)


def test_stiffness_scales_linearly(rng):
    m = make_model("klein", 3, params=FourierParams.random(3, scale=0.05, rng=rng))
    k = stiffness(m)
    assert k > 0
    assert stiffness(m.with_params(2 * m.field.params.coefficients)) == pytest.approx(2 * k, rel=1e-12)


def test_density_config_validation():
    with pytest.raises(ValueError):
        DensityConfig(space="cylinder").validate()
    with pytest.raises(ValueError):
        DensityConfig(grid_resolution=1).validate()
    with pytest.raises(ValueError):
        DensityConfig(stiffness_cap=0.0).validate()

import numpy as np
import pytest

from flowsym import _kernels_py, kernels
from oracles import naive_F

compiled = pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="compiled extension not built")


def _theta(rng, n1=4, n2=3):
    return rng.uniform(-1, 1, (2, 4, n1, n2))


def test_python_kernel_matches_scalar_oracle(rng):
    th = _theta(rng)
    u = rng.uniform(-3, 3, (20, 2))
    F, _, _ = _kernels_py.fourier_forward(th, u, 0)
    ref = np.array([naive_F(th, p) for p in u])
    assert np.allclose(F, ref, atol=1e-12)


@pytest.mark.parametrize("order", [1, 2])
def test_python_derivatives_match_finite_differences(rng, order):
    th = _theta(rng)
    u = rng.uniform(-1, 1, (10, 2))
    F, J, H = _kernels_py.fourier_forward(th, u, order)
    h = 1e-6
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        Fp, Jp, _ = _kernels_py.fourier_forward(th, u + e, 1)
        Fm, Jm, _ = _kernels_py.fourier_forward(th, u - e, 1)
        assert np.allclose(J[:, :, d], (Fp - Fm) / (2 * h), atol=1e-6)
        if order == 2:
            assert np.allclose(H[:, :, :, d], (Jp - Jm) / (2 * h), atol=1e-5)


def test_python_adjoint_is_transpose_of_forward(rng):
    th = _theta(rng)
    u = rng.uniform(-1, 1, (15, 2))
    wF = rng.normal(size=(15, 2))
    wJ = rng.normal(size=(15, 2, 2))
    g = _kernels_py.fourier_adjoint(th.shape, u, wF, wJ)
    # the forward map is linear in theta: <g, theta> equals the weighted outputs
    F, J, _ = _kernels_py.fourier_forward(th, u, 1)
    assert np.isclose(np.sum(g * th), np.sum(wF * F) + np.sum(wJ * J), rtol=1e-12)


@compiled
@pytest.mark.parametrize("order", [0, 1, 2])
def test_backend_parity_forward(rng, order):
    fc, _ = kernels.get_backend("compiled")
    fp, _ = kernels.get_backend("python")
    th = _theta(rng, 6, 6)
    u = rng.uniform(-40, 40, (500, 2))
    for a, b in zip(fc(th, u, order), fp(th, u, order)):
        if b is None:
            assert a is None
        else:
            assert np.allclose(a, b, rtol=1e-11, atol=1e-11 * np.abs(b).max())


@compiled
def test_backend_parity_adjoint(rng):
    _, ac = kernels.get_backend("compiled")
    _, ap = kernels.get_backend("python")
    th = _theta(rng, 5, 4)
    u = rng.uniform(-5, 5, (300, 2))
    wF = rng.normal(size=(300, 2))
    wJ = rng.normal(size=(300, 2, 2))
    for args in [(wF, wJ), (wF, None), (None, wJ)]:
        assert np.allclose(ac(th.shape, u, *args), ap(th.shape, u, *args), atol=1e-10)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_active_backend_reported():
    assert kernels.BACKEND in ("python", "compiled")

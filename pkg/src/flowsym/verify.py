"""Invariant battery behind ``flowsym verify``.

Each check returns a :class:`CheckResult`. Checks never raise; an exception
inside a check is reported as a failure with the exception text.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import FourierParams, SymmetrizedField
from .flow import IntegratorConfig, integrate_forward, integrate_inverse
from .identspace import IdentSpace, build_space_field, density_grid, make_model
from .isohedral import IsohedralClass, build_class_field, deform_tile, default_template, verify_tiling

SYMMETRY_TOL = 1e-9
INVERSE_TOL = 1e-5
NORMALIZATION_TOL = 0.02
# coefficient bounds of the random fields used by the checks
SYMMETRY_BOUND = 0.5
# beyond ~0.05 the summed divergence at rotation centres stretches or squeezes
# parts of the boundary by more than 1e14 over unit time, below float64 resolution
TILING_BOUND = 0.03
NORMALIZATION_BOUND = 0.02


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float
    detail: str = ""


def _run(name, fn) -> CheckResult:
    try:
        ok, err, detail = fn()
        return CheckResult(name, bool(ok), float(err), detail)
    except Exception as exc:  # reported, not raised
        return CheckResult(name, False, float("nan"), f"{type(exc).__name__}: {exc}")


def equivariance_error(field: SymmetrizedField, n_points: int = 1000, rng=0, span: int = 2) -> float:
    """Max relative error of ``V(g p) = g_lin V(p)`` over group cosets and lattice shifts."""
    rng = np.random.default_rng(rng)
    g = field.group
    B = g.basis
    p = rng.random((n_points, 2)) @ B.T
    V = field(p)
    scale = max(float(np.abs(V).max()), 1e-300)
    worst = 0.0
    shifts = rng.integers(-span, span + 1, size=(n_points, 2)) @ B.T
    for el in g.cosets:
        lhs = field(el.apply(p) + shifts)
        rhs = V @ el.linear.T
        worst = max(worst, float(np.abs(lhs - rhs).max()) / scale)
    return worst


def check_symmetry_class(cls, quick=False, seed=0) -> CheckResult:
    def fn():
        T = default_template(cls)
        sf = build_class_field(FourierParams.random(3, scale=SYMMETRY_BOUND, rng=seed), T, cls)
        err = equivariance_error(sf, 200 if quick else 1000, rng=seed)
        return err <= SYMMETRY_TOL, err, f"|G|={sf.group.order}"

    return _run(f"symmetry[{IsohedralClass.parse(cls).value}]", fn)


def check_symmetry_space(space, quick=False, seed=0) -> CheckResult:
    def fn():
        sf = build_space_field(FourierParams.random(3, scale=SYMMETRY_BOUND, rng=seed), space)
        err = equivariance_error(sf, 200 if quick else 1000, rng=seed)
        return err <= SYMMETRY_TOL, err, f"|G|={sf.group.order}"

    return _run(f"symmetry[{IdentSpace.parse(space).value}]", fn)


def check_template(cls) -> CheckResult:
    def fn():
        T = default_template(cls)
        T.validate()
        return True, 0.0, f"{T.n_edges} edges"

    return _run(f"template[{IsohedralClass.parse(cls).value}]", fn)


def check_tiling(cls, quick=False, seed=0) -> CheckResult:
    """Deform the default template with a random field and run :func:`verify_tiling`."""

    def fn():
        T = default_template(cls)
        omega, bound = (2, 0.02) if quick else (3, TILING_BOUND)
        sf = build_class_field(FourierParams.random(omega, scale=bound, rng=seed), T, cls)
        d = T.polygon.diameter
        tile = deform_tile(T, sf, IntegratorConfig(), 32 if quick else 64, max_chord=0.05 * d,
                           tol=(1e-3 if quick else 1e-4) * d, max_points=100_000, auto_steps=0.5)
        rep = verify_tiling(tile, cls, T, n_samples=2000 if quick else 20000, rng=seed)
        err = max(1.0 - rep.covered_fraction, rep.overlap_fraction, abs(rep.area_ratio - 1.0))
        return rep.passed, err, (f"coverage={rep.covered_fraction:.4f} overlap={rep.overlap_fraction:.4f} "
                                 f"area={rep.area_ratio:.4f}")

    return _run(f"verify_tiling[{IsohedralClass.parse(cls).value}]", fn)


def check_inverse(quick=False, seed=0) -> CheckResult:
    def fn():
        # base periodic field: class fields multiply it by their branch multiplicities
        sf = SymmetrizedField(FourierParams.random(2, scale=0.2, rng=seed), [])
        q = np.random.default_rng(seed).random((100 if quick else 1000, 2)) * 3
        cfg = IntegratorConfig(steps=64)
        err = float(np.abs(integrate_inverse(sf, integrate_forward(sf, q, cfg), cfg) - q).max())
        return err <= INVERSE_TOL, err, "64 steps, omega 2, sup-norm 0.2"

    return _run("inverse_consistency", fn)


def check_normalization(space, quick=False, seed=0) -> CheckResult:
    def fn():
        m = make_model(space, 3, params=FourierParams.random(3, scale=NORMALIZATION_BOUND, rng=seed),
                       cfg=IntegratorConfig(steps=16))
        mass = float(density_grid(m, 64 if quick else 256).mean())
        return abs(mass - 1.0) <= NORMALIZATION_TOL, abs(mass - 1.0), f"mass={mass:.5f}"

    return _run(f"normalization[{IdentSpace.parse(space).value}]", fn)


def run_battery(classes=None, spaces=None, quick: bool = False, seed: int = 0) -> list[CheckResult]:
    classes = list(IsohedralClass) if classes is None else [IsohedralClass.parse(c) for c in classes]
    spaces = list(IdentSpace) if spaces is None else [IdentSpace.parse(s) for s in spaces]
    out = [check_inverse(quick, seed)]
    for c in classes:
        out.append(check_template(c))
        out.append(check_symmetry_class(c, quick, seed))
        out.append(check_tiling(c, quick, seed))
    for s in spaces:
        out.append(check_symmetry_space(s, quick, seed))
        out.append(check_normalization(s, quick, seed))
    return out

"""Fourier vector fields and their symmetrization.

A symmetrized field is stored as an explicit list of branches ``(L, M, t)``
so that ``V(p) = sum_b L_b F(M_b p + t_b)`` where ``F`` is the unit-square
periodic Fourier field. Every operator (basis conjugation, rotation sum,
transflection sum, affine conjugation) maps a branch list to a new branch
list, so evaluation, Jacobian, divergence and reverse-mode gradients all
reduce to one batched call of the Fourier kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateBasis, SymmetryIncompatible
from .geom import AffineMap, Line, reflection_matrix, rotation_matrix

GROUP_TOL = 1e-9
MAX_GROUP_ORDER = 48


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class FourierParams:
    """Coefficient tensor of shape ``(2, 4, omega1 + 1, omega2 + 1)``."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 4 or c.shape[0] != 2 or c.shape[1] != 4 or c.shape[2] < 1 or c.shape[3] < 1:
            raise ValueError(f"coefficient tensor must have shape (2, 4, I, J), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def omega1(self) -> int:
        return self.coefficients.shape[2] - 1

    @property
    def omega2(self) -> int:
        return self.coefficients.shape[3] - 1

    @property
    def shape(self):
        return self.coefficients.shape

    @classmethod
    def zeros(cls, omega1: int, omega2: int | None = None) -> "FourierParams":
        omega2 = omega1 if omega2 is None else omega2
        return cls(np.zeros((2, 4, omega1 + 1, omega2 + 1)))

    @classmethod
    def random(cls, omega1: int, omega2: int | None = None, scale: float = 0.1, rng=None) -> "FourierParams":
        """Uniform coefficients in ``[-scale, scale]``."""
        omega2 = omega1 if omega2 is None else omega2
        rng = np.random.default_rng(rng)
        return cls(rng.uniform(-scale, scale, size=(2, 4, omega1 + 1, omega2 + 1)))

    def with_coefficients(self, c) -> "FourierParams":
        return FourierParams(np.asarray(c, dtype=float).reshape(self.shape))


# --------------------------------------------------------------------------
# symmetry operators


@dataclass(frozen=True)
class BasisConjugation:
    """``P_B(V)(p) = B V(B^-1 p)``; columns of ``basis`` are b1, b2."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.array(self.basis, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(B)) or abs(np.linalg.det(B)) <= 1e-12:
            raise DegenerateBasis(f"basis is degenerate: {B.tolist()}")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)


@dataclass(frozen=True)
class RotationSym:
    """Sum of ``R^-k V(R_c^k p)`` over ``k = 1..order``."""

    center: np.ndarray
    order: int

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(2)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if int(self.order) != self.order or self.order < 2:
            raise ValueError(f"rotation order must be an integer >= 2, got {self.order}")
        object.__setattr__(self, "order", int(self.order))


@dataclass(frozen=True)
class TransflectionSym:
    """``V(p) + M(V(G(p)))`` with ``G`` the glide reflection along ``line`` by ``glide``."""

    line: Line
    glide: float

    def __post_init__(self):
        object.__setattr__(self, "glide", float(self.glide))


@dataclass(frozen=True)
class AffineConjugation:
    """Place the field in world coordinates with a similarity ``A``.

    ``mode="conjugate"``: ``A_lin V(A^-1 p)`` (symmetry is transported);
    ``mode="precompose"``: ``V(A^-1 p)`` as a plain pre-composition.
    """

    affine: AffineMap
    mode: str = "conjugate"

    def __post_init__(self):
        if self.mode not in ("conjugate", "precompose"):
            raise ValueError(f"unknown affine mode {self.mode!r}")


SymmetryOp = BasisConjugation | RotationSym | TransflectionSym | AffineConjugation


# --------------------------------------------------------------------------
# isometries modulo a lattice


@dataclass(frozen=True)
class Isometry:
    """Plane map ``p -> linear p + translation``."""

    linear: np.ndarray
    translation: np.ndarray

    def apply(self, p):
        return np.asarray(p, dtype=float) @ self.linear.T + self.translation

    def compose(self, other: "Isometry") -> "Isometry":
        """``self o other``."""
        return Isometry(self.linear @ other.linear, self.linear @ other.translation + self.translation)

    def inverse(self) -> "Isometry":
        Li = np.linalg.inv(self.linear)
        return Isometry(Li, -Li @ self.translation)

    def conjugate(self, linear, translation=np.zeros(2)) -> "Isometry":
        """``T o self o T^-1`` with ``T(p) = linear p + translation``."""
        T = Isometry(np.asarray(linear, float), np.asarray(translation, float))
        return T.compose(self).compose(T.inverse())

    @property
    def is_reflection(self) -> bool:
        return bool(np.linalg.det(self.linear) < 0)


def _rotation_iso(c, k, K) -> Isometry:
    R = rotation_matrix(2.0 * math.pi * k / K)
    c = np.asarray(c, float)
    return Isometry(R, c - R @ c)


def _glide_iso(line: Line, mu: float) -> Isometry:
    Mo = reflection_matrix(line.direction)
    return Isometry(Mo, line.anchor - Mo @ line.anchor + mu * line.direction)


class SymmetryGroup:
    """Finite quotient ``Gamma / Lambda`` of a crystallographic group.

    ``cosets`` holds one representative per coset (identity first) with
    translations reduced into the lattice cell spanned by ``basis``.
    """

    def __init__(self, basis, generators: Sequence[Isometry] = ()):
        self.basis = np.asarray(basis, float)
        if abs(np.linalg.det(self.basis)) <= 1e-12:
            raise DegenerateBasis("lattice basis is degenerate")
        self.basis_inv = np.linalg.inv(self.basis)
        self.cosets = self._closure(list(generators))

    def _reduce(self, g: Isometry) -> Isometry:
        f = self.basis_inv @ g.translation
        f = f - np.floor(f + 1e-9)
        f[np.abs(f - 1.0) < 1e-9] = 0.0
        return Isometry(g.linear, self.basis @ f)

    def _key_match(self, g: Isometry, h: Isometry) -> bool:
        if np.max(np.abs(g.linear - h.linear)) > 1e-7:
            return False
        d = self.basis_inv @ (g.translation - h.translation)
        d = d - np.round(d)
        return bool(np.max(np.abs(d)) < 1e-7)

    def _check(self, g: Isometry):
        Q = self.basis_inv @ g.linear @ self.basis
        if np.max(np.abs(Q - np.round(Q))) > GROUP_TOL * max(1.0, np.max(np.abs(Q))):
            raise SymmetryIncompatible(
                "symmetry element does not map the translation lattice to itself"
            )
        if np.max(np.abs(g.linear - np.eye(2))) < 1e-9:
            d = self.basis_inv @ g.translation
            d = d - np.round(d)
            if np.max(np.abs(d)) > GROUP_TOL:
                raise SymmetryIncompatible(
                    f"group contains a translation {g.translation.tolist()} outside the lattice"
                )

    def _closure(self, gens):
        ident = Isometry(np.eye(2), np.zeros(2))
        elems = [ident]
        gens = [self._reduce(g) for g in gens]
        for g in gens:
            self._check(g)
        frontier = [ident]
        while frontier:
            new = []
            for a in frontier:
                for g in gens:
                    h = self._reduce(g.compose(a))
                    self._check(h)
                    if not any(self._key_match(h, e) for e in elems):
                        elems.append(h)
                        new.append(h)
                        if len(elems) > MAX_GROUP_ORDER:
                            raise SymmetryIncompatible("symmetry group is not finite modulo the lattice")
            frontier = new
        return elems

    @property
    def order(self) -> int:
        return len(self.cosets)

    def transformed(self, linear, translation) -> "SymmetryGroup":
        """Group in coordinates ``q = linear p + translation``."""
        out = SymmetryGroup.__new__(SymmetryGroup)
        out.basis = np.asarray(linear, float) @ self.basis
        out.basis_inv = np.linalg.inv(out.basis)
        out.cosets = [out._reduce(g.conjugate(linear, translation)) for g in self.cosets]
        return out

    def reduce_point(self, p):
        """Translate points into the half-open cell spanned by the basis at the origin."""
        p = np.asarray(p, float)
        f = p @ self.basis_inv.T
        f = f - np.floor(f)
        return f @ self.basis.T


# --------------------------------------------------------------------------
# symmetrized field


class FieldEval(NamedTuple):
    value: np.ndarray
    jacobian: np.ndarray | None
    divergence: np.ndarray | None


@dataclass
class FieldGrad:
    """Parameter gradient: coefficient part plus optional ``(angle, scale, tx, ty)``."""

    theta: np.ndarray
    affine: np.ndarray | None = None

    def __add__(self, other: "FieldGrad") -> "FieldGrad":
        aff = None
        if self.affine is not None or other.affine is not None:
            aff = (np.zeros(4) if self.affine is None else self.affine) + (
                np.zeros(4) if other.affine is None else other.affine
            )
        return FieldGrad(self.theta + other.theta, aff)

    def scaled(self, s: float) -> "FieldGrad":
        return FieldGrad(self.theta * s, None if self.affine is None else self.affine * s)


@dataclass(frozen=True)
class _Branches:
    L: np.ndarray  # (nb, 2, 2)
    M: np.ndarray  # (nb, 2, 2)
    t: np.ndarray  # (nb, 2)


def _expand(ops: Sequence, affine_split: bool):
    """Build branches for ``ops`` (innermost first), stopping at the affine operator."""
    L = [np.eye(2)]
    M = [np.eye(2)]
    t = [np.zeros(2)]
    affine = None
    for op in ops:
        if isinstance(op, AffineConjugation):
            affine = op
            continue
        if affine is not None:
            raise ValueError("AffineConjugation must be the outermost operator")
        if isinstance(op, BasisConjugation):
            B = op.basis
            Bi = np.linalg.inv(B)
            L = [B @ l for l in L]
            M = [m @ Bi for m in M]
        elif isinstance(op, RotationSym):
            nL, nM, nt = [], [], []
            for k in range(1, op.order + 1):
                Rk = rotation_matrix(2.0 * math.pi * k / op.order)
                Rmk = Rk.T
                shift = op.center - Rk @ op.center
                for l, m, tt in zip(L, M, t):
                    nL.append(Rmk @ l)
                    nM.append(m @ Rk)
                    nt.append(m @ shift + tt)
            L, M, t = nL, nM, nt
        elif isinstance(op, TransflectionSym):
            Mo = reflection_matrix(op.line.direction)
            shift = op.line.anchor - Mo @ op.line.anchor + op.glide * op.line.direction
            L = L + [Mo @ l for l in L]
            M, t = M + [m @ Mo for m in M], t + [m @ shift + tt for m, tt in zip(M, t)]
        else:
            raise TypeError(f"unknown symmetry operator {op!r}")
    return _merge(np.array(L), np.array(M), np.array(t)), affine


def _merge(L, M, t):
    """Combine branches with equal ``M`` and ``t`` congruent mod 1 (F is 1-periodic), summing ``L``."""
    keys = []
    outL, outM, outt = [], [], []
    for l, m, tt in zip(L, M, t):
        frac = tt - np.floor(tt)
        hit = None
        for idx, (km, kt) in enumerate(keys):
            d = frac - kt
            d -= np.round(d)
            if np.max(np.abs(km - m)) < 1e-12 and np.max(np.abs(d)) < 1e-12:
                hit = idx
                break
        if hit is None:
            keys.append((m, frac))
            outL.append(l.copy())
            outM.append(m)
            outt.append(tt)
        else:
            outL[hit] = outL[hit] + l
    keep = [i for i, l in enumerate(outL) if np.max(np.abs(l)) > 1e-14]
    if not keep:
        keep = [0]
    return _Branches(np.array(outL)[keep], np.array(outM)[keep], np.array(outt)[keep])


def _build_group(ops: Sequence) -> SymmetryGroup:
    """Compatibility check: closure of all symmetry elements modulo the lattice."""
    basis = np.eye(2)
    gens: list[Isometry] = []
    for op in ops:
        if isinstance(op, BasisConjugation):
            B = op.basis
            basis = B @ basis
            gens = [g.conjugate(B) for g in gens]
        elif isinstance(op, RotationSym):
            gens.append(_rotation_iso(op.center, 1, op.order))
        elif isinstance(op, TransflectionSym):
            gens.append(_glide_iso(op.line, op.glide))
    return SymmetryGroup(basis, gens)


class SymmetrizedField:
    """Base Fourier field plus an ordered (innermost-first) list of symmetry operators."""

    def __init__(self, params: FourierParams, ops: Sequence = (), *, check: bool = True, _cache=None):
        if not isinstance(params, FourierParams):
            params = FourierParams(params)
        self.params = params
        self.ops = tuple(ops)
        if _cache is not None:
            self._inner, self.canonical_group = _cache
        else:
            self._inner, _ = _expand(self.ops, True)
            self.canonical_group = _build_group(self.ops) if check else None
        self.affine_op = next((op for op in self.ops if isinstance(op, AffineConjugation)), None)
        self._branches = self._apply_affine()

    # ---- construction helpers

    def _apply_affine(self) -> _Branches:
        b = self._inner
        op = self.affine_op
        if op is None:
            return b
        A = op.affine
        N = A.inverse_linear
        L = b.L if op.mode == "precompose" else np.einsum("ij,bjk->bik", A.linear, b.L)
        M = b.M @ N
        t = b.t - np.einsum("bij,j->bi", M, A.translation)
        return _Branches(L, M, t)

    def with_params(self, params=None, affine: AffineMap | None = None) -> "SymmetrizedField":
        """Same operators with new coefficients and/or a new affine placement."""
        params = self.params if params is None else params
        if not isinstance(params, FourierParams):
            params = self.params.with_coefficients(params)
        ops = self.ops
        if affine is not None:
            if self.affine_op is None:
                raise ValueError("field has no AffineConjugation to update")
            ops = tuple(AffineConjugation(affine, op.mode) if isinstance(op, AffineConjugation) else op for op in ops)
        return SymmetrizedField(params, ops, _cache=(self._inner, self.canonical_group))

    @property
    def affine(self) -> AffineMap | None:
        return None if self.affine_op is None else self.affine_op.affine

    @property
    def n_branches(self) -> int:
        return len(self._branches.L)

    @property
    def group(self) -> SymmetryGroup | None:
        """Symmetry group in world coordinates (after affine conjugation)."""
        g = self.canonical_group
        if g is None or self.affine_op is None:
            return g
        A = self.affine_op.affine
        return g.transformed(A.linear, A.translation)

    @property
    def lattice(self) -> np.ndarray:
        g = self.group
        return g.basis if g is not None else _build_group(self.ops).basis

    # ---- evaluation

    def _stage_points(self, p):
        b = self._branches
        return np.einsum("bij,nj->bni", b.M, p) + b.t[:, None, :]

    def evaluate(self, p, jacobian: bool = False, divergence: bool = False) -> FieldEval:
        """Field value at ``p`` (shape ``(N, 2)``), optionally its Jacobian and divergence."""
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        b = self._branches
        nb, n = len(b.L), len(p)
        u = self._stage_points(p).reshape(nb * n, 2)
        order = 1 if (jacobian or divergence) else 0
        F, J, _ = kernels.fourier_forward(self.params.coefficients, u, order)
        F = F.reshape(nb, n, 2)
        V = np.einsum("bkj,bnj->nk", b.L, F)
        JV = dv = None
        if order:
            J = J.reshape(nb, n, 2, 2)
            if jacobian:
                JV = np.einsum("bij,bnjk,bkl->nil", b.L, J, b.M)
            if divergence:
                P = b.M @ b.L
                dv = np.einsum("bnkd,bdk->n", J, P)
        return FieldEval(V, JV, dv)

    def __call__(self, p):
        return self.evaluate(p).value

    # ---- reverse mode

    def backward(self, p, g_value=None, g_div=None, want_point: bool = True, want_params: bool = True):
        """Pull back cotangents of ``V(p)`` and ``div V(p)``.

        Returns ``(grad_p, FieldGrad)``; ``grad_p`` has shape ``(N, 2)``.
        """
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        b = self._branches
        nb, n = len(b.L), len(p)
        theta = self.params.coefficients
        need_aff = want_params and self.affine_op is not None
        u = self._stage_points(p).reshape(nb * n, 2)
        have_div = g_div is not None and np.any(g_div)
        have_val = g_value is not None and np.any(g_value)
        if not (have_div or have_val):
            gt = FieldGrad(np.zeros(theta.shape), np.zeros(4) if self.affine_op is not None else None)
            return np.zeros((n, 2)), gt
        order = 0
        if want_point or need_aff:
            order = 2 if have_div else 1
        F, J, H = kernels.fourier_forward(theta, u, order)
        F = F.reshape(nb, n, 2)
        if J is not None:
            J = J.reshape(nb, n, 2, 2)
        P = b.M @ b.L  # (nb, 2, 2)
        wF = None
        wJ = None
        if have_val:
            g_value = np.asarray(g_value, float).reshape(n, 2)
            wF = np.einsum("nk,bkj->bnj", g_value, b.L)  # L^T g
        if have_div:
            g_div = np.asarray(g_div, float).reshape(n)
            wJ = g_div[None, :, None, None] * np.transpose(P, (0, 2, 1))[:, None, :, :]
        grad_theta = None
        if want_params:
            grad_theta = kernels.fourier_adjoint(
                theta.shape,
                u,
                None if wF is None else wF.reshape(nb * n, 2),
                None if wJ is None else wJ.reshape(nb * n, 2, 2),
            )
        gu = None
        if want_point or need_aff:
            gu = np.zeros((nb, n, 2))
            if wF is not None:
                gu += np.einsum("bnkd,bnk->bnd", J, wF)
            if wJ is not None:
                H = H.reshape(nb, n, 2, 2, 2)
                gu += np.einsum("bnkde,bnkd->bne", H, wJ)
        grad_p = np.einsum("bne,bed->nd", gu, b.M) if want_point else None
        g_aff = None
        if need_aff:
            g_aff = self._affine_grad(p, F, J, gu, g_value if have_val else None, g_div if have_div else None)
        elif want_params and self.affine_op is not None:
            g_aff = np.zeros(4)
        return grad_p, FieldGrad(grad_theta, g_aff)

    def _affine_grad(self, p, F, J, gu, g_value, g_div):
        b0 = self._inner
        b = self._branches
        op = self.affine_op
        A = op.affine
        # gradients w.r.t. final branch matrices
        gL = np.zeros_like(b.L)
        if g_value is not None:
            gL += np.einsum("nk,bnj->bkj", g_value, F)
        gM = np.einsum("bni,nj->bij", gu, p)
        gt = gu.sum(axis=1)
        if g_div is not None:
            # d tr(L J M) / dL = (J M)^T ; / dM = (L J)^T
            JM = np.einsum("n,bnkd,bde->bke", g_div, J, b.M)
            LJ = np.einsum("n,bik,bnkd->bid", g_div, b.L, J)
            gL += np.transpose(JM, (0, 2, 1))
            gM += np.transpose(LJ, (0, 2, 1))
        # chain to (A_lin, N, t_A)
        gAlin = np.zeros((2, 2))
        if op.mode == "conjugate":
            gAlin = np.einsum("bij,bkj->ik", gL, b0.L)
        # M = M0 N ; t = t0 - M0 N tA
        gN = np.einsum("bji,bjk->ik", b0.M, gM)
        gN -= np.einsum("bji,bj,k->ik", b0.M, gt, A.translation)
        gtA = -np.einsum("bji,bj->i", b.M, gt)
        d_lin, d_inv, d_t = A.derivatives()
        return np.array(
            [np.sum(gAlin * d_lin[i]) + np.sum(gN * d_inv[i]) + gtA @ d_t[i] for i in range(4)]
        )


# --------------------------------------------------------------------------
# functional interface


def _as_points(p):
    p = np.asarray(p, dtype=float)
    return p.reshape(-1, 2), p.ndim == 1


def eval_F(params: FourierParams, p):
    """Base periodic Fourier field at ``p`` (a point or an ``(N, 2)`` array)."""
    pts, single = _as_points(p)
    F, _, _ = kernels.fourier_forward(params.coefficients, pts, 0)
    return F[0] if single else F


def jacobian_F(params: FourierParams, p):
    pts, single = _as_points(p)
    _, J, _ = kernels.fourier_forward(params.coefficients, pts, 1)
    return J[0] if single else J


def eval_symfield(sf: SymmetrizedField, p):
    pts, single = _as_points(p)
    v = sf.evaluate(pts).value
    return v[0] if single else v


def divergence_symfield(sf: SymmetrizedField, p):
    pts, single = _as_points(p)
    d = sf.evaluate(pts, divergence=True).divergence
    return float(d[0]) if single else d


def vjp_symfield(sf: SymmetrizedField, p, cotangent) -> FieldGrad:
    """Gradient of ``sum_n <cotangent_n, V(p_n)>`` w.r.t. coefficients (and affine parameters)."""
    pts, _ = _as_points(p)
    cot = np.asarray(cotangent, float).reshape(-1, 2)
    cot = np.broadcast_to(cot, pts.shape)
    _, g = sf.backward(pts, g_value=cot, want_point=False)
    return g


def vjp_divergence(sf: SymmetrizedField, p, cotangent) -> FieldGrad:
    pts, _ = _as_points(p)
    cot = np.broadcast_to(np.asarray(cotangent, float).reshape(-1), (len(pts),))
    _, g = sf.backward(pts, g_div=cot, want_point=False)
    return g


# --------------------------------------------------------------------------
# text serialization

_HEADER = "flowsym-field 1"


def _fmt(x) -> str:
    return repr(float(x))


def dumps_field(sf: SymmetrizedField) -> str:
    """Flat text: header, frequencies, operator list, then coefficients in (k, l, i, j) order."""
    lines = [_HEADER, f"omega {sf.params.omega1} {sf.params.omega2}", f"ops {len(sf.ops)}"]
    for op in sf.ops:
        if isinstance(op, BasisConjugation):
            lines.append("basis " + " ".join(_fmt(v) for v in op.basis.ravel()))
        elif isinstance(op, RotationSym):
            lines.append(f"rotation {_fmt(op.center[0])} {_fmt(op.center[1])} {op.order}")
        elif isinstance(op, TransflectionSym):
            a, d = op.line.anchor, op.line.direction
            lines.append(f"transflection {_fmt(a[0])} {_fmt(a[1])} {_fmt(d[0])} {_fmt(d[1])} {_fmt(op.glide)}")
        elif isinstance(op, AffineConjugation):
            v = op.affine.as_vector()
            lines.append("affine " + " ".join(_fmt(x) for x in v) + f" {op.mode}")
    lines.append("coefficients")
    lines.extend(_fmt(x) for x in sf.params.coefficients.ravel())
    return "\n".join(lines) + "\n"


def loads_field(text: str, check: bool = True) -> SymmetrizedField:
    rows = [r.strip() for r in text.splitlines() if r.strip()]
    if not rows or rows[0] != _HEADER:
        raise ValueError("not a flowsym field file")
    _, o1, o2 = rows[1].split()
    o1, o2 = int(o1), int(o2)
    nops = int(rows[2].split()[1])
    ops = []
    for r in rows[3 : 3 + nops]:
        kind, *vals = r.split()
        if kind == "basis":
            ops.append(BasisConjugation(np.array([float(v) for v in vals]).reshape(2, 2)))
        elif kind == "rotation":
            ops.append(RotationSym([float(vals[0]), float(vals[1])], int(vals[2])))
        elif kind == "transflection":
            v = [float(x) for x in vals]
            ops.append(TransflectionSym(Line(v[0:2], v[2:4]), v[4]))
        elif kind == "affine":
            v = [float(x) for x in vals[:4]]
            ops.append(AffineConjugation(AffineMap.from_vector(v), vals[4] if len(vals) > 4 else "conjugate"))
        else:
            raise ValueError(f"unknown operator line {r!r}")
    if rows[3 + nops] != "coefficients":
        raise ValueError("missing coefficient block")
    coef = np.array([float(x) for x in rows[4 + nops :]])
    expected = 2 * 4 * (o1 + 1) * (o2 + 1)
    if coef.size != expected:
        raise ValueError(f"expected {expected} coefficients, found {coef.size}")
    return SymmetrizedField(FourierParams(coef.reshape(2, 4, o1 + 1, o2 + 1)), ops, check=check)

"""The nine isohedral template classes and tiling utilities.

Templates are given by their vertex positions ``p_i``; the translation
basis, rotation centres and glide lines of each class are written in terms
of those points. Every default template is certified by
:func:`verify_tiling`, the Monte-Carlo coverage oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolated, SymmetryIncompatible
from .field import (
    AffineConjugation,
    BasisConjugation,
    FourierParams,
    Isometry,
    RotationSym,
    SymmetrizedField,
    SymmetryGroup,
    TransflectionSym,
    _build_group,
)
from .flow import IntegratorConfig, integrate_forward, suggest_steps
from .geom import AffineMap, Line, Polygon, boundary_distance, point_in_polygon, rotation_matrix

SQRT3 = math.sqrt(3.0)


class IsohedralClass(enum.Enum):
    IH1 = "IH1"
    IH2 = "IH2"
    IH3 = "IH3"
    IH4 = "IH4"
    IH5 = "IH5"
    IH6 = "IH6"
    IH7 = "IH7"
    IH21 = "IH21"
    IH28 = "IH28"

    @property
    def group_tag(self) -> str:
        return _GROUP_TAGS[self]

    @property
    def coset_count(self) -> int:
        return {"p1": 1, "pg": 2, "p2": 2, "pgg": 4, "p3": 3, "p4": 4, "p6": 6}[self.group_tag]

    @classmethod
    def parse(cls, name) -> "IsohedralClass":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper()
        if not key.startswith("IH"):
            key = "IH" + key
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown isohedral class {name!r}") from None


_GROUP_TAGS = {
    IsohedralClass.IH1: "p1",
    IsohedralClass.IH2: "pg",
    IsohedralClass.IH3: "pg",
    IsohedralClass.IH4: "p2",
    IsohedralClass.IH5: "pgg",
    IsohedralClass.IH6: "pgg",
    IsohedralClass.IH7: "p3",
    IsohedralClass.IH21: "p6",
    IsohedralClass.IH28: "p4",
}


# --------------------------------------------------------------------------
# per-class formulas (points p are the template vertices)


def _unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def _class_data(cls: IsohedralClass, p: np.ndarray):
    """Return (basis with columns b1, b2; symmetry ops innermost first)."""
    C = IsohedralClass
    if cls is C.IH1:
        return np.column_stack([p[0] + p[1], p[1] + p[2]]), []
    if cls is C.IH2:
        d = _unit(p[1] + p[2])
        mu = np.linalg.norm((p[1] + p[2]) / 2)
        g1 = TransflectionSym(Line((p[0] + p[1]) / 2, d), mu)
        g2 = TransflectionSym(Line((5 * p[0] + p[2]) / 2, d), mu)
        return np.column_stack([3 * p[0], p[1] + p[2]]), [g2, g1]
    if cls is C.IH3:
        d = _unit(p[0])
        mu = np.linalg.norm(1.5 * p[0])
        g1 = TransflectionSym(Line((p[0] + p[1]) / 2, d), mu)
        g2 = TransflectionSym(Line(0.75 * (p[1] + p[2]), d), mu)
        return np.column_stack([3 * p[0], p[1] + p[2]]), [g2, g1]
    if cls is C.IH4:
        c1 = 1.5 * (p[0] + p[1])
        c2 = (p[0] + 2 * p[1] + p[2]) / 2
        c3 = (p[0] + p[1]) / 2
        c4 = (3 * p[0] + 2 * p[1] - p[2]) / 2
        ops = [RotationSym(c4, 2), RotationSym(c3, 2), RotationSym(c2, 2), RotationSym(c1, 2)]
        return np.column_stack([3 * p[0], p[1] + p[2]]), ops
    if cls is C.IH5:
        c1 = (11 * p[0] + p[2]) / 2
        c2 = (11 * p[0] + p[1] + 2 * p[2]) / 2
        g1 = TransflectionSym(Line(p[1], _unit(p[0])), np.linalg.norm(3 * p[0]))
        g2 = TransflectionSym(Line((7 * p[0] + p[1]) / 2, _unit(p[1] + p[2])), np.linalg.norm((p[1] + p[2]) / 2))
        ops = [g2, g1, RotationSym(c2, 2), RotationSym(c1, 2)]
        return np.column_stack([6 * p[0], p[1] + p[2]]), ops
    if cls is C.IH6:
        c1 = (p[0] + 4 * p[1] + 3 * p[2]) / 2
        c2 = (5 * p[0] + 3 * p[1] + 4 * p[2]) / 2
        g1 = TransflectionSym(Line(np.zeros(2), _unit(p[1] + p[2])), np.linalg.norm(p[1] + p[2]))
        g2 = TransflectionSym(Line(1.25 * (p[1] + p[2]), _unit(p[0])), np.linalg.norm(1.5 * p[0]))
        ops = [g2, g1, RotationSym(c2, 2), RotationSym(c1, 2)]
        return np.column_stack([3 * p[0], 2 * (p[1] + p[2])]), ops
    if cls is C.IH7:
        return np.column_stack([3 * p[0], 3 * p[1]]), [RotationSym(2 * p[0] + p[1], 3)]
    if cls is C.IH21:
        b1 = p[3] + p[4]
        b2 = rotation_matrix(math.pi / 3) @ b1
        return np.column_stack([b1, b2]), [RotationSym(p[0], 6), RotationSym(p[2], 3)]
    if cls is C.IH28:
        return np.column_stack([2 * p[2], p[3] + p[4]]), [RotationSym(p[0], 4), RotationSym(p[2], 4)]
    raise ValueError(cls)


# --------------------------------------------------------------------------
# templates


def _hexagon():
    k = np.arange(6)
    return np.stack([np.cos(k * math.pi / 3), np.sin(k * math.pi / 3)], axis=1)


def _floret_pentagon():
    # 60 deg at p0 (6-fold centre), 120 deg elsewhere; p2 is a 3-fold centre
    return np.array([
        [0.0, 0.0],
        [3.0 / 7.0, SQRT3 / 21.0],
        [0.5, SQRT3 / 6.0],
        [5.0 / 14.0, 11.0 * SQRT3 / 42.0],
        [1.0 / 7.0, 5.0 * SQRT3 / 21.0],
    ])


def _cairo_pentagon():
    # angles (90, 120, 90, 120, 120); p0 and p2 are 4-fold centres
    a = (3.0 - SQRT3) / 12.0
    return np.array([
        [0.0, 0.0],
        [0.5 - a, a],
        [0.5, 0.5],
        [a, 0.5 + a],
        [-a, 0.5 - a],
    ])


_TEMPLATE_SCALE = {IsohedralClass.IH21: 4.0, IsohedralClass.IH28: 3.0}

# vertex-angle constraints (vertex index -> degrees)
_ANGLE_CONSTRAINTS = {
    IsohedralClass.IH7: {0: 120.0, 2: 120.0, 4: 120.0},
    IsohedralClass.IH21: {0: 60.0, 2: 120.0},
    IsohedralClass.IH28: {0: 90.0, 2: 90.0},
}


@dataclass(frozen=True)
class Identification:
    edge: int
    partner: int
    kind: str  # "T" translation, "C" half turn, "R<k>" k-fold rotation, "G" glide
    isometry: Isometry


class TemplateTile:
    """Template polygon of an isohedral class with derived edge identifications."""

    def __init__(self, cls, points, check: bool = True):
        self.cls = IsohedralClass.parse(cls)
        pts = np.array(points, dtype=float)
        pts.setflags(write=False)
        self.points = pts
        self.polygon = Polygon(pts)
        if not np.allclose(self.polygon.vertices, pts):
            raise ConstraintViolated("template points must be listed counter-clockwise")
        self.basis, self.ops = _class_data(self.cls, pts)
        try:
            self.group = _build_group([BasisConjugation(self.basis)] + list(self.ops))
        except SymmetryIncompatible as exc:
            raise ConstraintViolated(f"{self.cls.value} template geometry is incompatible: {exc}") from exc
        self.identifications = self._find_identifications()
        if check:
            self.validate()

    @property
    def edge_vectors(self) -> np.ndarray:
        return np.roll(self.points, -1, axis=0) - self.points

    @property
    def n_edges(self) -> int:
        return len(self.points)

    def vertex_angles(self) -> np.ndarray:
        """Interior angles in degrees."""
        v = self.points
        a = np.roll(v, 1, axis=0) - v
        b = np.roll(v, -1, axis=0) - v
        cosang = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        return np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))

    def group_elements(self, span: int = 2):
        """Coset representatives composed with lattice translations in ``[-span, span]^2``."""
        out = []
        for ci, g in enumerate(self.group.cosets):
            for m in range(-span, span + 1):
                for n in range(-span, span + 1):
                    t = self.basis @ np.array([m, n], float)
                    out.append((ci, (m, n), Isometry(g.linear, g.translation + t)))
        return out

    def _find_identifications(self):
        v = self.points
        k = len(v)
        scale = self.polygon.diameter
        found = []
        for ci, mn, g in self.group_elements():
            if ci == 0 and mn == (0, 0):
                continue
            gv = g.apply(v)
            # orientation-reversing elements keep the edge direction, others flip it
            flip = np.linalg.det(g.linear) > 0
            for i in range(k):
                a, b = gv[i], gv[(i + 1) % k]
                if flip:
                    a, b = b, a
                for j in range(k):
                    if (np.linalg.norm(a - v[j]) < 1e-9 * scale
                            and np.linalg.norm(b - v[(j + 1) % k]) < 1e-9 * scale):
                        found.append((i, j, g))
        idents = {}
        for i, j, g in found:
            if i in idents:
                continue
            idents[i] = Identification(i, j, _iso_kind(g), g)
        return [idents[i] for i in sorted(idents)]

    def validate(self):
        """Check closure, edge pairing and the class's angular constraints."""
        if np.linalg.norm(self.edge_vectors.sum(axis=0)) > 1e-12 * max(1.0, self.polygon.diameter):
            raise ConstraintViolated("edge vectors do not close")
        paired = {idn.edge for idn in self.identifications}
        missing = sorted(set(range(self.n_edges)) - paired)
        if missing:
            raise ConstraintViolated(f"{self.cls.value}: edges {missing} have no partner edge under the tiling group")
        ang = self.vertex_angles()
        for idx, want in _ANGLE_CONSTRAINTS.get(self.cls, {}).items():
            if abs(ang[idx] - want) > 1e-7:
                raise ConstraintViolated(
                    f"{self.cls.value}: angle at vertex {idx} is {ang[idx]:.9f}, expected {want}"
                )
        area_ratio = self.polygon.area * self.group.order / abs(np.linalg.det(self.basis))
        if abs(area_ratio - 1.0) > 1e-9:
            raise ConstraintViolated(f"{self.cls.value}: tile area does not match the period cell ({area_ratio:.6f})")

    def __repr__(self):
        return f"TemplateTile({self.cls.value}, {self.n_edges} vertices)"


def _iso_kind(g: Isometry) -> str:
    L = g.linear
    if np.linalg.det(L) < 0:
        return "G"
    if np.allclose(L, np.eye(2), atol=1e-9):
        return "T"
    ang = math.atan2(L[1, 0], L[0, 0])
    k = int(round(2 * math.pi / abs(ang)))
    return "C" if k == 2 else f"R{k}"


def default_template(cls) -> TemplateTile:
    cls = IsohedralClass.parse(cls)
    if cls is IsohedralClass.IH21:
        pts = _floret_pentagon()
    elif cls is IsohedralClass.IH28:
        pts = _cairo_pentagon()
    else:
        pts = _hexagon()
    return TemplateTile(cls, pts * _TEMPLATE_SCALE.get(cls, 1.0))


def translation_basis(template: TemplateTile) -> np.ndarray:
    return template.basis.copy()


def symmetry_elements(template: TemplateTile, cls=None) -> list:
    """Rotation and transflection operators of the class, innermost first."""
    if cls is not None and IsohedralClass.parse(cls) is not template.cls:
        template = TemplateTile(cls, template.points)
    return list(template.ops)


def build_class_field(params: FourierParams, template: TemplateTile, cls=None, affine: AffineMap | None = None,
                      affine_mode: str = "conjugate") -> SymmetrizedField:
    """``P_B`` then the class symmetrizations in order, then the affine placement."""
    if cls is not None and IsohedralClass.parse(cls) is not template.cls:
        template = TemplateTile(cls, template.points)
    ops = [BasisConjugation(template.basis)] + list(template.ops)
    affine = AffineMap.identity() if affine is None else affine
    ops.append(AffineConjugation(affine, affine_mode))
    try:
        return SymmetrizedField(params, ops)
    except SymmetryIncompatible as exc:
        raise ConstraintViolated(str(exc)) from exc


# --------------------------------------------------------------------------
# tiling group


@dataclass(frozen=True)
class TilingGroupElement:
    """Isometry placing one tile copy: coset index plus lattice offset."""

    linear: np.ndarray
    translation: np.ndarray
    coset: int
    lattice: tuple[int, int]

    @property
    def matrix(self) -> np.ndarray:
        return np.column_stack([self.linear, self.translation])

    @property
    def kind(self) -> str:
        k = _iso_kind(Isometry(self.linear, self.translation))
        return {"T": "translation", "G": "transflection"}.get(k, "rotation")

    def apply(self, p):
        return np.asarray(p, float) @ self.linear.T + self.translation

    def apply_inverse(self, p):
        return (np.asarray(p, float) - self.translation) @ self.linear

    def compose(self, other: "TilingGroupElement") -> Isometry:
        return Isometry(self.linear @ other.linear, self.linear @ other.translation + self.translation)


def _world_group(template: TemplateTile, affine: AffineMap | None) -> SymmetryGroup:
    if affine is None:
        return template.group
    return template.group.transformed(affine.linear, affine.translation)


def enumerate_group(template: TemplateTile, cls=None, window=None, affine: AffineMap | None = None,
                    tile_bbox=None) -> list[TilingGroupElement]:
    """All placements whose tile bounding box meets ``window = (x0, y0, x1, y1)``.

    ``affine`` places the template in world coordinates; ``tile_bbox``
    overrides the placed tile's bounding box (e.g. for deformed tiles).
    """
    if cls is not None and IsohedralClass.parse(cls) is not template.cls:
        template = TemplateTile(cls, template.points)
    grp = _world_group(template, affine)
    B = grp.basis
    if window is None:
        cell = np.array([[0, 0], B[:, 0], B[:, 1], B[:, 0] + B[:, 1]])
        window = (*cell.min(axis=0), *cell.max(axis=0))
    x0, y0, x1, y1 = window
    if tile_bbox is None:
        verts = template.points if affine is None else affine.apply(template.points)
        tile_bbox = (*verts.min(axis=0), *verts.max(axis=0))
    tb = np.array(tile_bbox, float)
    tile_pts = np.array([[tb[0], tb[1]], [tb[2], tb[1]], [tb[0], tb[3]], [tb[2], tb[3]]])
    Binv = np.linalg.inv(B)
    wc = np.array([[x0, y0], [x1, y0], [x0, y1], [x1, y1]])
    out = []
    for ci, g in enumerate(grp.cosets):
        placed = g.apply(tile_pts)
        lo, hi = placed.min(axis=0), placed.max(axis=0)
        # lattice offsets that can bring the placed bbox into the window
        corners = np.concatenate([wc - lo, wc - hi, wc - (lo + hi) / 2])
        f = corners @ Binv.T
        mlo, nlo = np.floor(f.min(axis=0)).astype(int) - 1
        mhi, nhi = np.ceil(f.max(axis=0)).astype(int) + 1
        for m in range(mlo, mhi + 1):
            for n in range(nlo, nhi + 1):
                t = B @ np.array([m, n], float)
                plo, phi = lo + t, hi + t
                if plo[0] <= x1 and phi[0] >= x0 and plo[1] <= y1 and phi[1] >= y0:
                    out.append(TilingGroupElement(g.linear, g.translation + t, ci, (m, n)))
    return out


# --------------------------------------------------------------------------
# deformation and the tiling oracle


def sample_boundary(poly_points, samples_per_edge: int = 64) -> np.ndarray:
    if samples_per_edge < 1:
        raise ValueError("samples_per_edge must be >= 1")
    v = np.asarray(poly_points, float)
    w = np.roll(v, -1, axis=0)
    t = np.arange(samples_per_edge) / samples_per_edge
    pts = v[:, None, :] + t[None, :, None] * (w - v)[:, None, :]
    return pts.reshape(-1, 2)


def cell_samples(field: SymmetrizedField, n: int = 4096, rng=0) -> np.ndarray:
    """Uniform points in one period cell of ``field`` (world coordinates)."""
    u = np.random.default_rng(rng).random((n, 2))
    return u @ np.asarray(field.lattice).T


def deform_tile(template: TemplateTile, field: SymmetrizedField, cfg: IntegratorConfig = IntegratorConfig(),
                samples_per_edge: int = 64, max_chord: float | None = None, tol: float | None = None,
                max_points: int = 200_000, auto_steps: float | None = None, min_param: float = 1e-15) -> Polygon:
    """Forward-flow the (affinely placed) template boundary; returns a dense polyline.

    Refinement bisects boundary parameter intervals whose deformed chord is
    longer than ``max_chord`` or whose deformed midpoint deviates from the
    chord midpoint by more than ``tol``, until no interval does (or
    ``max_points`` is reached). Both tests are isometry invariant, so paired
    edges are refined alike. ``auto_steps`` (a target for ``h * max|J|``)
    raises ``cfg.steps`` via :func:`flowsym.flow.suggest_steps`.

    Intervals shorter than ``min_param`` (in edge-fraction units) are not
    split further. Near a rotation center the divergence adds up over all K
    branches and the flow can stretch by more than 1e15 there, so bisection
    would otherwise never end. Such a chord ends at an identified point and
    its partner is the same isometric chord, so the tiling stays exact.
    """
    if samples_per_edge < 2:
        raise ValueError("samples_per_edge must be >= 2")
    A = field.affine or AffineMap.identity()
    verts = A.apply(template.points)
    pts = sample_boundary(verts, samples_per_edge)
    if not np.any(field.params.coefficients):
        return Polygon(pts, check=False)
    if auto_steps is not None:
        cfg = suggest_steps(field, np.concatenate([pts, cell_samples(field)]), cfg, target=auto_steps)
    out = integrate_forward(field, pts, cfg)
    if max_chord is None and tol is None:
        return Polygon(out, check=False)
    k = len(verts)
    # boundary parameter s in [0, k): edge floor(s), fraction s - floor(s)
    s = np.arange(k * samples_per_edge) / samples_per_edge
    # refinement priority of interval [s_i, s_{i+1}): inf until tested, then the
    # worst violation ratio of its parent; <= 1 means resolved
    score = np.full(len(s), np.inf)
    while len(s) < max_points and np.any(score > 1.0):
        cand = np.nonzero(score > 1.0)[0]
        budget = max_points - len(s)
        if len(cand) > budget:
            cand = cand[np.argsort(-score[cand], kind="stable")[:budget]]
        idx = np.sort(cand)
        s_next = np.append(s[1:], k)[idx]
        mids = 0.5 * (s[idx] + s_next)
        e = np.floor(mids).astype(int)
        f = mids - e
        mo = integrate_forward(field, verts[e] + f[:, None] * (verts[(e + 1) % k] - verts[e]), cfg)
        a_, b_ = out[idx], out[(idx + 1) % len(out)]
        r = np.zeros(len(idx))
        if max_chord is not None:
            r = np.maximum(r, np.linalg.norm(b_ - a_, axis=1) / max_chord)
        if tol is not None:
            r = np.maximum(r, np.linalg.norm(mo - 0.5 * (a_ + b_), axis=1) / tol)
        r[s_next - s[idx] < 2 * min_param] = 0.0
        score[idx] = r
        order = np.argsort(np.concatenate([s, mids]), kind="stable")
        s = np.concatenate([s, mids])[order]
        out = np.concatenate([out, mo])[order]
        score = np.concatenate([score, r])[order]
    return Polygon(out, check=False)


@dataclass
class TilingReport:
    covered_fraction: float
    overlap_fraction: float
    area_ratio: float
    samples: int
    coverage_tol: float = 0.999
    overlap_tol: float = 0.001
    area_tol: float = 0.01

    @property
    def passed(self) -> bool:
        return (self.covered_fraction >= self.coverage_tol and self.overlap_fraction <= self.overlap_tol
                and abs(self.area_ratio - 1.0) <= self.area_tol)

    def as_dict(self):
        return {"covered_fraction": self.covered_fraction, "overlap_fraction": self.overlap_fraction,
                "area_ratio": self.area_ratio, "samples": self.samples, "passed": self.passed}


def verify_tiling(tile: Polygon, cls=None, template: TemplateTile | None = None, affine: AffineMap | None = None,
                  n_samples: int = 20000, eps: float = 1e-3, rng=0) -> TilingReport:
    """Monte-Carlo tiling check over one period cell.

    Each sample point of the cell (excluding a band of width ``eps`` around
    tile boundaries) must be covered by exactly one group image of ``tile``.
    ``affine`` is the world placement of ``tile`` (tiles from
    :func:`deform_tile` carry the field's affine).
    """
    if template is None:
        template = default_template(cls)
    elif cls is not None and IsohedralClass.parse(cls) is not template.cls:
        template = TemplateTile(cls, template.points)
    if affine is not None:
        Ai = affine.inverse()
        tile = Polygon(Ai.apply(tile.vertices), check=False)
    grp = template.group
    B = grp.basis
    rng = np.random.default_rng(rng)
    x = rng.random((n_samples, 2)) @ B.T
    tb = tile.bbox()
    elems = enumerate_group(template, window=(*x.min(axis=0), *x.max(axis=0)),
                            tile_bbox=(tb[0] - eps, tb[1] - eps, tb[2] + eps, tb[3] + eps))
    count = np.zeros(n_samples, dtype=np.int32)
    near = np.zeros(n_samples, dtype=bool)
    for e in elems:
        y = e.apply_inverse(x)
        cand = np.nonzero((y[:, 0] >= tb[0] - eps) & (y[:, 0] <= tb[2] + eps)
                          & (y[:, 1] >= tb[1] - eps) & (y[:, 1] <= tb[3] + eps))[0]
        if len(cand) == 0:
            continue
        near[cand] |= boundary_distance(tile, y[cand]) < eps
        count[cand] += point_in_polygon(tile, y[cand])
    keep = ~near
    kept = max(int(np.count_nonzero(keep)), 1)
    covered = np.count_nonzero(count[keep] >= 1) / kept
    overlap = np.count_nonzero(count[keep] >= 2) / kept
    area_ratio = tile.area * grp.order / abs(np.linalg.det(B))
    return TilingReport(float(covered), float(overlap), float(area_ratio), n_samples)


# --------------------------------------------------------------------------
# SVG


_PALETTE = ["#e6550d", "#3182bd", "#31a354", "#756bb1", "#fdae6b", "#9ecae1"]


def tiling_svg(tile: Polygon, template: TemplateTile, affine: AffineMap | None = None, cells: int = 4,
               size_px: int = 800) -> str:
    """SVG 1.1 drawing of the tiling over ``cells x cells`` period cells."""
    grp = _world_group(template, affine)
    B = grp.basis
    corners = np.array([[0, 0], cells * B[:, 0], cells * B[:, 1], cells * (B[:, 0] + B[:, 1])])
    x0, y0 = corners.min(axis=0)
    x1, y1 = corners.max(axis=0)
    # group elements act in world coordinates: A g A^-1
    elems = enumerate_group(template, window=(x0, y0, x1, y1), affine=affine,
                            tile_bbox=(*tile.vertices.min(axis=0), *tile.vertices.max(axis=0)))
    w, h = x1 - x0, y1 - y0
    s = size_px / max(w, h)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w * s:.1f}" height="{h * s:.1f}" '
        f'viewBox="{x0:.6f} {-y1:.6f} {w:.6f} {h:.6f}">',
        '<g transform="scale(1,-1)">',
    ]
    for e in elems:
        pts = e.apply(tile.vertices)
        d = "M " + " L ".join(f"{p[0]:.5f},{p[1]:.5f}" for p in pts) + " Z"
        color = _PALETTE[e.coset % len(_PALETTE)]
        parts.append(f'<path d="{d}" fill="{color}" fill-opacity="0.8" stroke="#222" stroke-width="{0.6 / s:.5f}"/>')
    cell = np.array([[0, 0], B[:, 0], B[:, 0] + B[:, 1], B[:, 1]])
    d = "M " + " L ".join(f"{p[0]:.5f},{p[1]:.5f}" for p in cell) + " Z"
    parts.append(f'<path d="{d}" fill="none" stroke="#000" stroke-width="{2.0 / s:.5f}" stroke-dasharray="{6 / s:.4f}"/>')
    parts.append("</g></svg>")
    return "\n".join(parts) + "\n"

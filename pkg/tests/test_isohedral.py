import xml.etree.ElementTree as ET

import numpy as np
import pytest
from shapely.geometry import Polygon as SPolygon
from shapely.ops import unary_union

from flowsym.errors import ConstraintViolated
from flowsym.field import FourierParams
from flowsym.flow import IntegratorConfig
from flowsym.geom import AffineMap
from flowsym.isohedral import (IsohedralClass, TemplateTile, build_class_field, deform_tile, default_template,
                               enumerate_group, sample_boundary, tiling_svg, translation_basis,
                               verify_tiling)

ALL = list(IsohedralClass)
KINDS = {
    "IH1": "TTTTTT", "IH2": "GTGGTG", "IH4": "CTCCTC", "IH5": "GTCCTG", "IH6": "GGGCGC",
    "IH7": ["R3"] * 6, "IH21": ["R6", "R3", "R3", "C", "R6"], "IH28": ["R4", "R4", "R4", "C", "R4"],
}


def test_parse_and_tags():
    assert IsohedralClass.parse("4") is IsohedralClass.IH4
    assert IsohedralClass.parse("ih21") is IsohedralClass.IH21
    with pytest.raises(ValueError):
        IsohedralClass.parse("IH99")
    assert [c.group_tag for c in ALL] == ["p1", "pg", "pg", "p2", "pgg", "pgg", "p3", "p6", "p4"]


@pytest.mark.parametrize("cls", ALL)
def test_default_templates_are_valid(cls):
    T = default_template(cls)
    T.validate()
    assert T.group.order == cls.coset_count
    # tile area times |G| equals the period cell area
    assert np.isclose(T.polygon.area * T.group.order, abs(np.linalg.det(translation_basis(T))), rtol=1e-12)


@pytest.mark.parametrize("name,kinds", KINDS.items())
def test_edge_identification_kinds(name, kinds):
    T = default_template(name)
    assert [i.kind for i in T.identifications] == list(kinds)


@pytest.mark.parametrize("cls", ALL)
def test_paired_edges_are_congruent(cls):
    T = default_template(cls)
    v = T.points
    k = len(v)
    for idn in T.identifications:
        a = idn.isometry.apply(v[[idn.edge, (idn.edge + 1) % k]])
        b = v[[idn.partner, (idn.partner + 1) % k]]
        assert min(np.abs(a - b).max(), np.abs(a[::-1] - b).max()) < 1e-9


def test_corrupted_template_rejected():
    T = default_template("IH4")
    bad = T.points.copy()
    bad[1] += [0.05, 0.02]
    with pytest.raises(ConstraintViolated):
        TemplateTile("IH4", bad)


def test_angle_constraint_enforced():
    T = default_template("IH7")
    s = 1.05
    bad = T.points * [s, 1.0]
    with pytest.raises(ConstraintViolated):
        TemplateTile("IH7", bad)


@pytest.mark.parametrize("cls", ALL)
def test_placed_copies_tile_a_window_shapely(cls):
    """Independent check: union of the placed templates covers a window with no overlap area."""
    T = default_template(cls)
    B = translation_basis(T)
    c = 0.5 * (B[:, 0] + B[:, 1])
    r = 0.6 * min(np.linalg.norm(B[:, 0]), np.linalg.norm(B[:, 1]))
    win = (c[0] - r, c[1] - r, c[0] + r, c[1] + r)
    polys = [SPolygon(e.apply(T.points)) for e in enumerate_group(T, window=win)]
    W = SPolygon([(win[0], win[1]), (win[2], win[1]), (win[2], win[3]), (win[0], win[3])])
    parts = [p.intersection(W) for p in polys]
    total = sum(p.area for p in parts)
    assert np.isclose(unary_union(parts).area, W.area, rtol=1e-9)
    assert np.isclose(total, W.area, rtol=1e-9)


@pytest.mark.parametrize("cls", ALL)
def test_undeformed_template_passes_verify_tiling(cls):
    T = default_template(cls)
    rep = verify_tiling(T.polygon, cls, n_samples=3000)
    assert rep.passed, rep.as_dict()


def test_verify_tiling_detects_wrong_shape():
    T = default_template("IH1")
    shrunk = T.polygon.transformed(0.9 * np.eye(2))
    rep = verify_tiling(shrunk, "IH1", n_samples=3000)
    assert not rep.passed and rep.covered_fraction < 0.95


def test_verify_tiling_under_affine():
    T = default_template("IH6")
    A = AffineMap(0.8, 1.7, [3.0, -1.0])
    rep = verify_tiling(T.polygon.transformed(A.linear, A.translation), "IH6", T, affine=A, n_samples=3000)
    assert rep.passed


def test_sample_boundary_counts():
    pts = sample_boundary(default_template("IH28").points, 10)
    assert pts.shape == (50, 2)


@pytest.mark.parametrize("cls", ["IH1", "IH5", "IH7", "IH21"])
def test_small_deformation_still_tiles(cls):
    T = default_template(cls)
    A = AffineMap(0.3, 1.2, [0.5, 0.5])
    sf = build_class_field(FourierParams.random(2, scale=0.02, rng=3), T, cls, affine=A)
    d = T.polygon.diameter * A.scale
    tile = deform_tile(T, sf, IntegratorConfig(steps=16), 32, max_chord=0.05 * d, tol=1e-3 * d, auto_steps=0.5)
    rep = verify_tiling(tile, cls, T, affine=A, n_samples=5000)
    assert rep.passed, rep.as_dict()
    assert abs(tile.area - T.polygon.area * A.scale ** 2) < 5e-3 * tile.area


@pytest.mark.slow
@pytest.mark.parametrize("cls", [c.value for c in IsohedralClass])
def test_moderate_deformation_tiles_every_class(cls):
    T = default_template(cls)
    sf = build_class_field(FourierParams.random(3, scale=0.03, rng=1), T, cls)
    d = T.polygon.diameter
    tile = deform_tile(T, sf, IntegratorConfig(), 64, max_chord=0.05 * d, tol=1e-4 * d, max_points=100_000,
                       auto_steps=0.5)
    rep = verify_tiling(tile, cls, T, n_samples=20000)
    assert rep.passed, rep.as_dict()


def test_refinement_stops_at_parameter_floor():
    # the summed divergence at the 6-fold centre makes the flow stretch a
    # neighbourhood of it past float resolution; refinement must still end
    T = default_template("IH21")
    sf = build_class_field(FourierParams.random(3, scale=0.1, rng=1), T)
    d = T.polygon.diameter
    tile = deform_tile(T, sf, IntegratorConfig(), 16, max_chord=0.05 * d, tol=1e-3 * d, max_points=50_000,
                       auto_steps=0.5)
    assert len(tile.vertices) < 50_000


def test_zero_field_leaves_template_in_place():
    T = default_template("IH2")
    A = AffineMap(0.2, 2.0, [1.0, 1.0])
    sf = build_class_field(FourierParams.zeros(3), T, affine=A)
    tile = deform_tile(T, sf)
    assert np.allclose(tile.vertices[::64], A.apply(T.points), atol=1e-12)
    assert np.isclose(tile.area, T.polygon.area * 4.0)


def test_deformed_paired_edges_stay_congruent():
    T = default_template("IH4")
    sf = build_class_field(FourierParams.random(2, scale=0.03, rng=5), T)
    spe = 16
    tile = deform_tile(T, sf, IntegratorConfig(steps=32), spe)
    v = tile.vertices
    n = len(v)
    # vertex order may be reversed for orientation; rebuild per-edge runs from the raw flow
    from flowsym.flow import integrate_forward
    raw = integrate_forward(sf, sample_boundary(T.points, spe), IntegratorConfig(steps=32))
    raw = np.concatenate([raw, raw[:1]])
    for idn in T.identifications:
        a = raw[idn.edge * spe: idn.edge * spe + spe + 1]
        b = raw[idn.partner * spe: idn.partner * spe + spe + 1]
        ga = idn.isometry.apply(a)
        # exact in exact arithmetic; round-off is amplified by the flow's stretching
        assert min(np.abs(ga - b).max(), np.abs(ga[::-1] - b).max()) < 1e-8
    assert n == len(raw) - 1


def test_svg_is_well_formed():
    T = default_template("IH21")
    svg = tiling_svg(T.polygon, T, cells=2)
    root = ET.fromstring(svg.split("?>", 1)[1])
    assert root.tag.endswith("svg") and root.get("version") == "1.1"
    paths = root.findall(".//{http://www.w3.org/2000/svg}path")
    assert len(paths) > 2 * 2 * 6

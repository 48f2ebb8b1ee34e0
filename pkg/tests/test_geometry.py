import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from hexcryst import geometry as g
from hexcryst.constants import C6, HEX_DIAMETER
from hexcryst.energy import cn


def square_moment_quadrature(ref):
    """Independent oracle: adaptive 2-D quadrature over the unit square."""
    val, err = dblquad(lambda y, x: (x - ref[0]) ** 2 + (y - ref[1]) ** 2,
                       0.0, 1.0, 0.0, 1.0, epsabs=1e-12)
    assert err < 1e-10
    return val


# --- construction and validation -------------------------------------------

def test_polygon_requires_ccw_convex():
    with pytest.raises(g.GeometryError):
        g.ConvexPolygon([(0, 0), (0, 1), (1, 0)])  # clockwise
    with pytest.raises(g.GeometryError):
        g.ConvexPolygon([(0, 0), (1, 0)])
    with pytest.raises(g.GeometryError):
        g.ConvexPolygon([(0, 0), (2, 0), (1, 1), (1.5, 0.2)])  # reflex


def test_vertices_are_immutable():
    sq = g.unit_square()
    with pytest.raises(ValueError):
        sq.vertices[0, 0] = 5.0


def test_near_duplicate_vertices_merge():
    p = g.ConvexPolygon([(0, 0), (1, 0), (1 + 1e-12, 1e-12), (1, 1), (0, 1)])
    assert len(p) == 4


# --- clip -------------------------------------------------------------------

def test_clip_axis_aligned_cut():
    out = g.clip(g.unit_square(), g.HalfPlane((1.0, 0.0), 0.5))
    assert out is not None
    assert g.area(out) == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(sorted(out.vertices[:, 0]), [0, 0, 0.5, 0.5])


def test_clip_nonbinding_returns_equal_polygon():
    sq = g.unit_square()
    out = g.clip(sq, g.HalfPlane((1.0, 0.0), 2.0))
    assert out is not None and out is not sq
    assert np.array_equal(out.vertices, sq.vertices)


def test_clip_infeasible_returns_empty():
    assert g.clip(g.unit_square(), g.HalfPlane((1.0, 0.0), -1.0)) is None


def test_clip_partitions_area_exactly(rng):
    for _ in range(50):
        poly = g.random_convex_polygon(rng)
        direction = rng.normal(size=2)
        direction /= np.hypot(*direction)
        offset = float(direction @ g.centroid(poly)) + rng.normal(scale=0.3)
        left = g.clip(poly, g.HalfPlane(tuple(direction), offset))
        right = g.clip(poly, g.HalfPlane(tuple(-direction), -offset))
        total = sum(0.0 if p is None else g.area(p) for p in (left, right))
        assert total == pytest.approx(g.area(poly), rel=1e-12)
        for part in (left, right):
            if part is not None:
                assert g.area(part) <= g.area(poly) + 1e-12


# --- area / centroid --------------------------------------------------------

def test_area_examples():
    assert g.area(g.unit_square()) == pytest.approx(1.0, abs=1e-15)
    tri = g.ConvexPolygon([(0, 0), (1, 0), (0, 1)])
    assert g.area(tri) == pytest.approx(0.5, abs=1e-15)
    # regular hexagon with side 2^(1/2) 3^(-3/4) has area (3 sqrt(3)/2) s^2 = 1
    side = 2.0 ** 0.5 * 3.0 ** -0.75
    assert 1.5 * math.sqrt(3.0) * side * side == pytest.approx(1.0, rel=1e-15)
    assert g.area(g.regular_polygon(6)) == pytest.approx(1.0, rel=1e-14)


def test_centroid_examples(rng):
    assert np.allclose(g.centroid(g.unit_square()), [0.5, 0.5], atol=1e-15)
    tri = g.ConvexPolygon([(0, 0), (1, 0), (0, 1)])
    assert np.allclose(g.centroid(tri), [1 / 3, 1 / 3], atol=1e-15)
    poly = g.random_convex_polygon(rng)
    t = np.array([2.7, -1.3])
    assert np.allclose(g.centroid(g.translate(poly, t)),
                       g.centroid(poly) + t, atol=1e-12)


# --- second moments ---------------------------------------------------------

def test_second_moment_square_against_quadrature():
    sq = g.unit_square()
    assert g.second_moment(sq, (0.5, 0.5)) == pytest.approx(
        square_moment_quadrature((0.5, 0.5)), abs=1e-10)
    assert g.second_moment(sq, (0.5, 0.5)) == pytest.approx(1 / 6, abs=1e-15)
    # about a corner: parallel axis gives 1/6 + |ref - centroid|^2 = 2/3
    assert g.second_moment(sq, (0.0, 0.0)) == pytest.approx(2 / 3, abs=1e-15)
    assert g.second_moment(sq, (0.0, 0.0)) == pytest.approx(
        square_moment_quadrature((0.0, 0.0)), abs=1e-10)


def test_second_moment_hexagon_is_c6():
    hexagon = g.regular_polygon(6)
    assert g.min_second_moment(hexagon)[1] == pytest.approx(C6, abs=1e-15)
    assert C6 == pytest.approx(5 * math.sqrt(3) / 54, abs=1e-18)


def test_parallel_axis_identity(rng):
    for _ in range(100):
        poly = g.random_convex_polygon(rng, n_points=10)
        ref = rng.normal(size=2) * 2.0
        c, base = g.min_second_moment(poly)
        expected = base + g.area(poly) * float(((ref - c) ** 2).sum())
        scale = max(1.0, abs(expected))
        assert g.second_moment(poly, ref) == pytest.approx(
            expected, abs=1e-14 * scale)


def test_min_second_moment_square():
    point, value = g.min_second_moment(g.unit_square())
    assert np.allclose(point, [0.5, 0.5], atol=1e-15)
    assert value == pytest.approx(square_moment_quadrature((0.5, 0.5)),
                                  abs=1e-10)


def test_min_second_moment_regular_ngons_match_cn():
    for n in range(3, 13):
        point, value = g.min_second_moment(g.regular_polygon(n))
        assert np.allclose(point, [0, 0], atol=1e-12)
        assert value == pytest.approx(cn(n), rel=1e-13)


def test_min_second_moment_is_minimized_at_centroid(rng):
    poly = g.random_convex_polygon(rng)
    c, value = g.min_second_moment(poly)
    for _ in range(20):
        off = rng.normal(scale=1e-3, size=2)
        assert g.second_moment(poly, c + off) >= value


def test_second_moment_scales_as_fourth_power(rng):
    poly = g.random_convex_polygon(rng)
    s = 2.37
    assert g.min_second_moment(g.scale(poly, s))[1] == pytest.approx(
        s ** 4 * g.min_second_moment(poly)[1], rel=1e-12)


def test_moment_inequality_cn(rng):
    # I(P) >= c_n area(P)^2 with equality only for regular polygons
    for _ in range(50):
        poly = g.random_convex_polygon(rng, n_points=12)
        n = g.edge_count(poly)
        _, val = g.min_second_moment(poly)
        assert val >= cn(n) * g.area(poly) ** 2 - 1e-12
    for n in range(3, 10):
        reg = g.regular_polygon(n, poly_area=0.7)
        assert g.min_second_moment(reg)[1] == pytest.approx(
            cn(n) * 0.49, rel=1e-12)


# --- diameter / edge count --------------------------------------------------

def test_diameter_and_edges():
    assert g.diameter(g.unit_square()) == pytest.approx(math.sqrt(2))
    assert g.edge_count(g.unit_square()) == 4
    hexagon = g.regular_polygon(6)
    assert g.diameter(hexagon) == pytest.approx(HEX_DIAMETER, rel=1e-14)
    assert g.edge_count(hexagon) == 6


def test_degenerate_edge_collapses():
    # pentagon with one edge shorter than the tolerance acts as a square
    eps = 1e-12
    penta = g.ConvexPolygon([(0, 0), (1, 0), (1, 1 - eps), (1 - eps, 1),
                             (0, 1)])
    assert g.edge_count(penta) == 4


# --- rigid-motion invariance -------------------------------------------------

def test_rigid_motion_invariance(rng):
    for _ in range(20):
        poly = g.random_convex_polygon(rng)
        theta = rng.uniform(0, 2 * math.pi)
        t = rng.normal(size=2) * 3
        moved = g.translate(g.rotate(poly, theta), t)
        assert g.area(moved) == pytest.approx(g.area(poly), abs=1e-10)
        assert g.diameter(moved) == pytest.approx(g.diameter(poly), abs=1e-10)
        assert g.min_second_moment(moved)[1] == pytest.approx(
            g.min_second_moment(poly)[1], abs=1e-10)
        rot = np.array([[math.cos(theta), -math.sin(theta)],
                        [math.sin(theta), math.cos(theta)]])
        assert np.allclose(g.centroid(moved),
                           rot @ g.centroid(poly) + t, atol=1e-10)


def test_contains():
    sq = g.unit_square()
    assert g.contains(sq, (0.5, 0.5))
    assert g.contains(sq, (0.0, 0.0))
    assert not g.contains(sq, (1.1, 0.5))

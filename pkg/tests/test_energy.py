import math

import numpy as np
import pytest
from scipy.integrate import dblquad

import hexcryst.energy as en
from hexcryst import geometry as g
from hexcryst import tessellation as tess
from hexcryst import transport as tr
from hexcryst.constants import C6, KAPPA, LATTICE_SPACING, M0, M1, R0

from conftest import assert_euler


# --- constants ----------------------------------------------------------------

def test_constant_values():
    c = en.CONSTANTS
    assert 0.160374 < c.c6 < 0.160376
    assert c.c6 == pytest.approx(5 * math.sqrt(3) / 54, abs=1e-17)
    assert c.kappa < 0
    assert c.kappa == pytest.approx(-8.724e-4, abs=1e-7)
    assert c.m0 > c.m1
    assert c.D0 ** 2 == pytest.approx(
        4 * (c.c6 / math.sqrt(c.m0) + c.R0 ** 2), rel=1e-15)
    assert c.lattice_spacing == pytest.approx(2 ** 0.5 * 3 ** -0.25)
    assert c.hex_circumradius == pytest.approx(2 ** 0.5 * 3 ** -0.75)
    # neighbor spacing = sqrt(3) x hexagon circumradius
    assert c.lattice_spacing == pytest.approx(
        math.sqrt(3) * c.hex_circumradius, rel=1e-15)


# --- cn -------------------------------------------------------------------------

def test_cn_paper_value():
    assert en.cn(6) == pytest.approx(5 * math.sqrt(3) / 54, abs=1e-16)
    assert f"{en.cn(6):.6f}" == "0.160375"


def test_cn_square_by_quadrature():
    val, err = dblquad(lambda y, x: x * x + y * y, -0.5, 0.5, -0.5, 0.5,
                       epsabs=1e-13)
    assert en.cn(4) == pytest.approx(val, abs=1e-11)
    assert en.cn(4) == pytest.approx(1 / 6, abs=1e-16)


def test_cn_triangle_by_quadrature():
    # unit-area equilateral triangle: base on y = 0, apex above; dblquad's
    # outer variable is the height y, its inner variable the horizontal x
    side = math.sqrt(4.0 / math.sqrt(3.0))
    h = side * math.sqrt(3) / 2
    cy = h / 3  # centroid height above the base

    def integrand(x, y):
        return x * x + (y - cy) ** 2

    def half_width(y):
        return side / 2 * (1 - y / h)

    val, err = dblquad(integrand, 0.0, h,
                       lambda y: -half_width(y), half_width, epsabs=1e-13)
    assert en.cn(3) == pytest.approx(val, abs=1e-10)
    assert en.cn(3) == pytest.approx(1 / (3 * math.sqrt(3)), abs=1e-15)


def test_cn_monotone_and_limit():
    ns = np.arange(3, 2001)
    vals = en.cn(ns)
    assert np.all(np.diff(vals) < 0)
    assert np.all(en.cn(np.arange(3, 10001)) > 1 / (2 * math.pi))
    assert en.cn(10 ** 6) == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    with pytest.raises(ValueError):
        en.cn(2)


# --- f and v_lambda --------------------------------------------------------------

def test_f_examples():
    assert en.f(1.0, 6) == pytest.approx(3 * C6, abs=1e-15)
    assert en.f(0.0, 11) == 0.0
    assert en.f(4.0, 6) == pytest.approx(20 * C6, rel=1e-15)
    with pytest.raises(ValueError):
        en.f(-1.0, 6)


def test_v_lambda():
    assert en.v_lambda(2 * C6) == pytest.approx(1.0, abs=1e-15)
    assert en.v_lambda(1.0) == pytest.approx((2 * C6) ** (2 / 3), rel=1e-15)
    lam = 0.123
    assert en.v_lambda(lam / 8) == pytest.approx(4 * en.v_lambda(lam),
                                                 rel=1e-14)


# --- energy reports ---------------------------------------------------------------

def test_energy_square_center_point(square_domain):
    m = tr.AtomicMeasure([(0.5, 0.5)], [1.0])
    rep = en.energy(square_domain, m)
    assert rep.surface == pytest.approx(2 * C6, rel=1e-15)
    assert rep.transport == pytest.approx(1 / 6, rel=1e-13)
    assert rep.total == pytest.approx(2 * C6 + 1 / 6, rel=1e-13)
    assert rep.defect == pytest.approx(1 / 6 - C6, abs=1e-13)
    assert rep.defect == pytest.approx(0.006292, abs=5e-7)
    assert rep.total == rep.surface + rep.transport


def test_energy_hexagon_equality(square_domain):
    base = g.regular_polygon(6)
    dom = tess.DomainSpec.polygon(base, 2 * C6)
    m = tr.AtomicMeasure([(0.0, 0.0)], [1.0])
    rep = en.energy(dom, m)
    assert abs(rep.defect) <= 1e-10
    assert rep.total == pytest.approx(3 * C6, abs=1e-10)


def test_energy_torus_equality():
    # scaled torus a x a sqrt(3) holds two unit hexagons; V = 2
    dom = tess.commensurate_torus(1)
    a = LATTICE_SPACING
    m = tr.AtomicMeasure([(0.0, 0.0), (a / 2, a * math.sqrt(3) / 2)],
                         [1.0, 1.0])
    rep = en.energy(dom, m)
    assert rep.V_lambda == pytest.approx(2.0, rel=1e-14)
    assert rep.total == pytest.approx(3 * C6 * 2.0, abs=1e-11)
    assert abs(rep.defect) <= 1e-10


def test_lower_bound_theorem_random(square_domain, rng):
    hex_dom = tess.DomainSpec.polygon(g.regular_polygon(6), 2 * C6)
    for dom in (square_domain, hex_dom):
        for _ in range(25):
            n = int(rng.integers(1, 30))
            pts = rng.random((n, 2)) * 0.8 + 0.1
            pts *= math.sqrt(dom.area)
            inside = dom.contains(pts)
            pts = pts[inside]
            if len(pts) == 0:
                continue
            masses = rng.dirichlet(np.ones(len(pts))) * dom.area
            rep = en.energy(dom, tr.AtomicMeasure(pts, masses))
            assert rep.total >= 3 * C6 * rep.V_lambda - 1e-9
            assert_euler(rep.partition, dom)


def test_energy_chain_inequalities(square_domain, rng):
    # E >= 2 c6 sum sqrt(v) + sum I(cell) >= sum f(v_i, n_i)
    slack = en.solver_slack(square_domain.V_lambda)
    for _ in range(30):
        n = int(rng.integers(2, 21))
        pts = rng.random((n, 2)) * 0.9 + 0.05
        masses = rng.dirichlet(np.ones(n) * 2)
        rep = en.energy(square_domain, tr.AtomicMeasure(pts, masses))
        mid = rep.surface + sum(r.moment_min for r in rep.cells)
        low = en.cell_lower_bound_sum(rep)
        assert rep.total >= mid - slack
        assert mid >= low - slack


def test_partition_energy_cases(square_domain):
    m = tr.AtomicMeasure([(0.5, 0.5)], [1.0])
    sol = tr.solve_sdot(square_domain, m)
    F = en.partition_energy(square_domain, sol.partition)
    assert F == pytest.approx(2 * C6 + 1 / 6, rel=1e-12)

    dom = tess.commensurate_torus(1)
    a = LATTICE_SPACING
    m2 = tr.AtomicMeasure([(0.0, 0.0), (a / 2, a * math.sqrt(3) / 2)],
                          [1.0, 1.0])
    sol2 = tr.solve_sdot(dom, m2)
    assert en.partition_energy(dom, sol2.partition) == pytest.approx(
        6 * C6, rel=1e-12)


def test_partition_energy_below_energy_with_sites(square_domain, rng):
    # F uses centroidal moments, so F <= 2 c6 sum sqrt(v) + site-moment cost
    pts = rng.random((7, 2)) * 0.8 + 0.1
    masses = rng.dirichlet(np.ones(7))
    rep = en.energy(square_domain, tr.AtomicMeasure(pts, masses))
    F = en.partition_energy(square_domain, rep.partition)
    assert F <= rep.total + 1e-12


def test_hessian_determinant_formula():
    # det D^2 (v^2 c_n) = 8 pi^2 v^2 sec^2(pi/n) / (9 n^6), n continuous
    from hexcryst.certify import hessian_det_g

    for v in (0.5, 1.0, 3.0):
        for n in (4.0, 6.0, 9.0):
            hv, hn = 1e-4, 1e-3 * n

            def gg(vv, nn):
                return vv * vv * en.cn(nn)

            gvv = (gg(v + hv, n) - 2 * gg(v, n) + gg(v - hv, n)) / hv ** 2
            gnn = (gg(v, n + hn) - 2 * gg(v, n) + gg(v, n - hn)) / hn ** 2
            gvn = (gg(v + hv, n + hn) - gg(v + hv, n - hn)
                   - gg(v - hv, n + hn) + gg(v - hv, n - hn)) / (4 * hv * hn)
            det_fd = gvv * gnn - gvn ** 2
            assert det_fd == pytest.approx(hessian_det_g(v, n), rel=1e-4)
    assert hessian_det_g(1.0, 6.0) == pytest.approx(
        8 * math.pi ** 2 * (2 / math.sqrt(3)) ** 2 / (9 * 6 ** 6), rel=1e-15)

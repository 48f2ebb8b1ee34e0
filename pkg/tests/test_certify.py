import math

import numpy as np
import pytest

from hexcryst import certify as ct
from hexcryst import geometry as g
from hexcryst.constants import C6, KAPPA, M1, XI, ZETA


def _by_name(report, name):
    return next(c for c in report.checks if c.name == name)


def test_polar_quadrature_matches_closed_form(rng):
    for _ in range(5):
        poly = g.random_convex_polygon(rng)
        ref = g.centroid(poly)
        assert ct.polar_second_moment(poly, ref) == pytest.approx(
            g.second_moment(poly, ref), abs=1e-10)


def test_verify_cn_passes():
    rep = ct.verify_cn()
    assert rep.passed
    c6_check = _by_name(rep, "cn_formula_vs_quadrature_n6")
    assert c6_check.computed == pytest.approx(0.160375, abs=5e-7)
    assert _by_name(rep, "cn_limit_n64").deviation < 1e-3


def test_convexity_bound_passes():
    rep = ct.verify_convexity_bound(v_points=4000, n_max=400)
    assert rep.passed
    assert _by_name(rep, "convexity_gap_min").computed >= -1e-12
    # direct evaluation at (v, n) = (4, 6): 20 c6 - 12 c6 - 9 xi
    assert ct.convexity_gap(4.0, 6.0) == pytest.approx(
        8 * C6 - 9 * XI, rel=1e-12)
    assert ct.convexity_gap(4.0, 6.0) > 0


def test_convexity_gap_negative_below_m1():
    v = np.linspace(M1 * 1e-3, M1 * 0.999, 5000)
    gap = ct.convexity_gap(v, 6.0)
    assert gap.min() < 0
    # negativity occurs exactly below u6^2
    aa = C6 - XI
    u6 = -1.0 + math.sqrt(1.0 + XI / aa)
    assert np.all(gap[v > u6 * u6 * 1.01] >= 0)
    assert np.all(gap[v < u6 * u6 * 0.99] < 0)


def test_polynomial_certificates_match_paper():
    rep = ct.verify_polynomial_certificates()
    assert rep.passed
    assert _by_name(rep, "p6_positive_root_u6").computed == pytest.approx(
        0.0031, abs=5e-5)
    assert _by_name(rep, "p8_discriminant").computed == pytest.approx(
        -2.2e-5, abs=5e-7)
    for n, ref in [(3, -1.5e-3), (4, -2.0e-4), (5, -2.6e-5), (7, -1.3e-5)]:
        chk = _by_name(rep, f"qn_discriminant_n{n}")
        assert chk.passed and chk.reference == ref


def test_quartic_discriminant_against_numpy_roots(rng):
    for _ in range(20):
        a, c, d, e = rng.normal(size=4)
        if abs(a) < 0.1:
            continue
        disc = ct.quartic_discriminant(a, c, d, e)
        roots = np.roots([a, 0.0, c, d, e])
        prod = a ** 6
        for i in range(4):
            for j in range(i + 1, 4):
                prod *= (roots[i] - roots[j]) ** 2
        assert disc == pytest.approx(float(prod.real),
                                     rel=1e-6, abs=1e-9)


def test_minv_constants():
    rep = ct.verify_minv_constants()
    assert rep.passed
    argmin = _by_name(rep, "hole_bound_argmin_A")
    assert argmin.computed == pytest.approx(0.5820, abs=1e-3)
    assert ct.hole_radius_bound(argmin.computed) < 3.2143


def test_hessian_certificates():
    rep = ct.verify_hessian_g()
    assert rep.passed
    assert _by_name(rep, "hessian_det_fd_worst_rel_err").computed < 1e-4


def test_fejes_scaling_hexagon():
    rep, rows = ct.fejes_toth_scaling(g.regular_polygon(6),
                                      m_list=(50, 120, 280, 650))
    assert _by_name(rep, "product_at_or_above_c6").passed
    products = [r["product"] for r in rows]
    assert min(products) >= C6 - 1e-12
    # single-point trial on any <= 6-gon: 1 x W >= c6, equality for the hexagon
    one = ct.scaled_lattice_product(g.regular_polygon(6), 1,
                                    offset=(0.0, 0.0), rotation=0.0)
    assert one["product"] >= C6 - 1e-12


def test_run_all_passes():
    rep = ct.run_all(convexity_v_points=2000, convexity_n_max=200,
                     fejes_m_list=(60, 150, 400))
    assert rep.passed
    d = rep.as_dict()
    assert d["passed"] and len(d["checks"]) == len(rep.checks)

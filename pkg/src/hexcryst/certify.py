"""Runtime re-derivation of every numeric constant and inequality the
crystallization bounds rest on, packaged as machine-checkable certificates.

Each verify_* function recomputes its targets from closed-form coefficient
expressions (never from re-rounded decimals) and, where an independent route
exists, checks against adaptive quadrature or finite differences. Printed
reference values are matched to their printed precision: the tolerance is
half a unit in the last printed digit. All checks are deterministic; no
randomness enters this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import (C6, KAPPA, M0, M1, R0, XI, ZETA)
from .energy import cn, f
from .geometry import ConvexPolygon, area, centroid, edge_count, \
    regular_polygon
from .tessellation import cropped_voronoi
from .transport import transport_cost


@dataclass(frozen=True)
class CertificateCheck:
    name: str
    computed: float
    reference: float | None
    deviation: float
    tol: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "computed": self.computed,
                "reference": self.reference, "deviation": self.deviation,
                "tol": self.tol, "passed": bool(self.passed),
                "detail": self.detail}


@dataclass
class CertificateReport:
    checks: list[CertificateCheck] = field(default_factory=list)

    def add(self, name, computed, reference, tol, detail="",
            deviation=None, passed=None) -> CertificateCheck:
        if deviation is None:
            deviation = 0.0 if reference is None else abs(computed - reference)
        if passed is None:
            passed = deviation <= tol
        chk = CertificateCheck(name=name, computed=float(computed),
                               reference=None if reference is None
                               else float(reference),
                               deviation=float(deviation), tol=float(tol),
                               passed=bool(passed), detail=detail)
        self.checks.append(chk)
        return chk

    def add_flag(self, name, passed, detail="") -> CertificateCheck:
        chk = CertificateCheck(name=name, computed=float(bool(passed)),
                               reference=1.0,
                               deviation=0.0 if passed else 1.0, tol=0.0,
                               passed=bool(passed), detail=detail)
        self.checks.append(chk)
        return chk

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def extend(self, other: "CertificateReport") -> None:
        self.checks.extend(other.checks)

    def as_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": [c.as_dict() for c in self.checks]}


def _printed_tol(value: float, sig: int = 2) -> float:
    """Half a unit in the last digit of a value printed to `sig` figures."""
    if value == 0.0:
        return 0.5 * 10.0 ** -sig
    mag = math.floor(math.log10(abs(value)))
    return 0.5 * 10.0 ** (mag - sig + 1)


# ---------------------------------------------------------------------------
# polar quadrature (independent route for second moments)


def polar_second_moment(poly: ConvexPolygon, ref=None,
                        epsabs: float = 1e-12) -> float:
    """Second moment about an interior reference by adaptive 1-D quadrature.

    Writes the integral in polar form, int rho(theta)^4 / 4 dtheta, with
    rho the distance from the reference to the boundary; each angular sector
    between consecutive vertices has a smooth integrand handled by QUADPACK.
    Shares no code with the closed-form triangle decomposition.
    """
    from scipy.integrate import quad

    if ref is None:
        ref = centroid(poly)
    rx, ry = float(ref[0]), float(ref[1])
    v = poly.vertices - (rx, ry)
    ang = np.arctan2(v[:, 1], v[:, 0])
    n = len(v)
    total = 0.0
    for i in range(n):
        j = (i + 1) % n
        a0 = ang[i]
        a1 = ang[j]
        if a1 <= a0:
            a1 += 2.0 * math.pi
        ax, ay = v[i]
        bx, by = v[j]
        # outward line through the edge: nrm . x = c with c > 0
        ex, ey = bx - ax, by - ay
        nx, ny = ey, -ex
        c = nx * ax + ny * ay
        if c < 0:
            nx, ny, c = -nx, -ny, -c

        def rho4(th, nx=nx, ny=ny, c=c):
            r = c / (nx * math.cos(th) + ny * math.sin(th))
            return 0.25 * r ** 4

        val, _ = quad(rho4, a0, a1, epsabs=epsabs, epsrel=1e-13, limit=200)
        total += val
    return total


# ---------------------------------------------------------------------------
# individual certificate groups


def verify_cn(n_max: int = 12, tol: float = 1e-8) -> CertificateReport:
    """Moment-constant formula versus quadrature on constructed n-gons.

    For each n the regular unit-area polygon is built geometrically and its
    centroidal second moment integrated by adaptive quadrature; the value
    must match (1/2n)(tan(pi/n)/3 + cot(pi/n)) within tol. A tail check
    confirms the approach to the limit 1/(2 pi).
    """
    rep = CertificateReport()
    for n in range(3, n_max + 1):
        poly = regular_polygon(n)
        quad_val = polar_second_moment(poly)
        rep.add(f"cn_formula_vs_quadrature_n{n}", cn(n), quad_val, tol,
                detail="closed form vs adaptive polar quadrature")
    rep.add("cn_limit_n64", cn(64), 1.0 / (2.0 * math.pi), 1e-3,
            detail="approach to the n -> inf limit 1/(2 pi)")
    vals = cn(np.arange(3, 10001))
    diffs = np.diff(vals)
    # the analytic decrement is ~ 5.5 n^-5 and falls below one ulp of c_n
    # around n ~ 3000; demand strict decrease while it is resolvable and
    # non-increase (to an ulp) beyond
    strict = bool(np.all(diffs[:2000] < 0.0))
    loose = bool(np.all(diffs <= 1e-16))
    rep.add_flag("cn_strictly_decreasing_resolved_range", strict,
                 detail="strict decrease for n <= 2000")
    rep.add_flag("cn_nonincreasing_to_1e4", loose,
                 detail="non-increasing within one ulp up to n = 10^4")
    above = bool(np.all(vals > 1.0 / (2.0 * math.pi)))
    rep.add_flag("cn_above_limit", above)
    return rep


def convexity_gap(v, n):
    """g(v, n) = f(v, n) - 3 c6 v + kappa (6 - n) - xi (v-1)^2
    - zeta (1/n - 1/6)^2; nonnegative for v >= m1, any n >= 3."""
    varr = np.asarray(v, dtype=float)
    narr = np.asarray(n, dtype=float)
    return (f(varr, narr) - 3.0 * C6 * varr + KAPPA * (6.0 - narr)
            - XI * (varr - 1.0) ** 2 - ZETA * (1.0 / narr - 1.0 / 6.0) ** 2)


def verify_convexity_bound(v_points: int = 10000,
                           n_max: int = 1000) -> CertificateReport:
    """Grid scan of the quadratic lower bound on f.

    v runs over a log-spaced grid on [m1, 100], n over the integers 3..n_max;
    the gap must stay above -1e-12 everywhere, with exact equality at
    (v, n) = (1, 6). A scan below m1 exhibits the negativity that makes the
    mass threshold necessary.
    """
    rep = CertificateReport()
    v = np.logspace(math.log10(M1), 2.0, v_points)
    v = np.unique(np.concatenate([v, [1.0]]))
    worst = math.inf
    worst_at = (None, None)
    for n_lo in range(3, n_max + 1, 100):
        ns = np.arange(n_lo, min(n_lo + 100, n_max + 1), dtype=float)
        gap = convexity_gap(v[:, None], ns[None, :])
        k = int(np.argmin(gap))
        val = float(gap.ravel()[k])
        if val < worst:
            worst = val
            worst_at = (float(v[k // len(ns)]), float(ns[k % len(ns)]))
        del gap
    rep.add("convexity_gap_min", worst, None, math.inf,
            deviation=0.0, passed=worst >= -1e-12,
            detail=f"minimum over grid at (v, n) = {worst_at}; "
                   "must be >= -1e-12")
    rep.add("convexity_gap_equality_point", convexity_gap(1.0, 6.0), 0.0,
            1e-12, detail="sharp at v = 1, n = 6")
    v_low = np.linspace(M1 * 1e-4, M1, 2000)
    low_min = float(convexity_gap(v_low, 6.0).min())
    rep.add_flag("convexity_gap_negative_below_m1", low_min < 0.0,
                 detail=f"min over (0, m1) at n = 6 is {low_min:.3e}; the "
                        "bound genuinely needs v >= m1")
    return rep


def quartic_discriminant(a: float, c: float, d: float, e: float) -> float:
    """Discriminant of a u^4 + c u^2 + d u + e (no cubic term)."""
    return (256.0 * a**3 * e**3 - 128.0 * a**2 * c**2 * e**2
            + 144.0 * a**2 * c * d**2 * e - 27.0 * a**2 * d**4
            + 16.0 * a * c**4 * e - 4.0 * a * c**3 * d**2)


def _qn_coeffs(n: int) -> tuple[float, float, float, float]:
    """Coefficients of q_n(u) = g(u^2, n) as a quartic in u."""
    a = cn(n) - XI
    c = 2.0 * XI - 3.0 * C6
    d = 2.0 * C6
    e = (6.0 - n) * KAPPA - XI - ZETA * (1.0 / n - 1.0 / 6.0) ** 2
    return a, c, d, e


def verify_polynomial_certificates() -> CertificateReport:
    """Roots and discriminants of the case-analysis polynomials.

    p6 (the n = 6 factor) must have its positive root u6 near 0.0031 with
    u6^2 < m1; the large-n quartic p8 must have discriminant near -2.2e-5
    with both real roots negative; the per-n quartics for n = 3, 4, 5, 7
    must match the printed discriminant table and have their positive roots
    ordered below 0.012.
    """
    rep = CertificateReport()

    # p6(u) = (c6 - xi) u^2 + 2 (c6 - xi) u - xi
    aa = C6 - XI
    u6 = (-2.0 * aa + math.sqrt(4.0 * aa * aa + 4.0 * aa * XI)) / (2.0 * aa)
    rep.add("p6_positive_root_u6", u6, 0.0031, _printed_tol(0.0031),
            detail="positive root of (c6-xi)u^2 + 2(c6-xi)u - xi")
    rep.add_flag("u6_squared_below_m1", u6 * u6 < M1,
                 detail=f"u6^2 = {u6 * u6:.4e} < m1 = {M1}")

    # p8(u) = (1/2pi - xi) u^4 + (2 xi - 3 c6) u^2 + 2 c6 u
    #         - (2 kappa + xi + zeta/36)
    a8 = 1.0 / (2.0 * math.pi) - XI
    c8 = 2.0 * XI - 3.0 * C6
    d8 = 2.0 * C6
    e8 = -(2.0 * KAPPA + XI + ZETA / 36.0)
    disc8 = quartic_discriminant(a8, c8, d8, e8)
    rep.add("p8_discriminant", disc8, -2.2e-5, _printed_tol(2.2e-5),
            detail="negative discriminant: two real, two complex roots")
    roots8 = np.roots([a8, 0.0, c8, d8, e8])
    real8 = sorted(r.real for r in roots8 if abs(r.imag) < 1e-9)
    rep.add_flag("p8_two_real_roots_negative",
                 len(real8) == 2 and all(r < 0 for r in real8),
                 detail=f"real roots {real8}")

    printed = {3: -1.5e-3, 4: -2.0e-4, 5: -2.6e-5, 7: -1.3e-5}
    pos_roots = {}
    for n, ref in printed.items():
        a, c, d, e = _qn_coeffs(n)
        disc = quartic_discriminant(a, c, d, e)
        rep.add(f"qn_discriminant_n{n}", disc, ref, _printed_tol(ref),
                detail="from exact coefficient expressions")
        # cross-check the closed-form discriminant against the root product
        roots = np.roots([a, 0.0, c, d, e])
        prod = a ** 6
        for ii in range(4):
            for jj in range(ii + 1, 4):
                prod *= (roots[ii] - roots[jj]) ** 2
        rep.add(f"qn_discriminant_rootcheck_n{n}", float(prod.real), disc,
                1e-6 * abs(disc),
                detail="a^6 prod (r_i - r_j)^2 vs closed form")
        pos = [r.real for r in roots if abs(r.imag) < 1e-9 and r.real > 0]
        rep.add_flag(f"qn_single_positive_root_n{n}", len(pos) == 1,
                     detail=f"positive roots {pos}")
        pos_roots[n] = pos[0]
    ordered = pos_roots[7] < pos_roots[5] < pos_roots[4] < pos_roots[3] < 0.012
    rep.add_flag("positive_roots_ordered_below_0.012", bool(ordered),
                 detail=f"u7={pos_roots[7]:.4g} u5={pos_roots[5]:.4g} "
                        f"u4={pos_roots[4]:.4g} u3={pos_roots[3]:.4g}")
    rep.add_flag("m1_sqrt_above_roots", math.sqrt(M1) > 0.012,
                 detail=f"sqrt(m1) = {math.sqrt(M1):.4g} > 0.012")
    return rep


def hole_radius_bound(A: float) -> float:
    """Positive root R of R^2 = (R + d_A) sqrt(12 c6 (2 A^(-1/2) + A)),
    where d_A is the diameter of a hexagon of area A."""
    d_a = 2.0 ** 1.5 * 3.0 ** -0.75 * math.sqrt(A)
    beta = math.sqrt(12.0 * C6 * (2.0 / math.sqrt(A) + A))
    return 0.5 * (beta + math.sqrt(beta * beta + 4.0 * beta * d_a))


def verify_minv_constants() -> CertificateReport:
    """Constants of the hole/mass bounds: the hexagon-area minimization
    behind R0, the mass floor m0 = c6^2 / R0^4, the diameter bound D0, and
    the quadrature identity int_B dist(x, {0} u dB)^2 dx = pi R^4 / 12."""
    from scipy.integrate import quad
    from scipy.optimize import minimize_scalar

    rep = CertificateReport()
    res = minimize_scalar(hole_radius_bound, bracket=(0.3, 0.6, 1.2),
                          method="golden", options={"xtol": 1e-12})
    rep.add("hole_bound_argmin_A", float(res.x), 0.5820, 1e-3,
            detail="golden-section minimum of the hole-radius bound")
    rep.add_flag("hole_bound_min_below_R0", res.fun < R0,
                 detail=f"min R-hat = {res.fun:.10f} < R0 = {R0}")
    m0_derived = C6 * C6 / R0 ** 4
    rep.add_flag("m0_floor", m0_derived >= M0,
                 detail=f"c6^2/R0^4 = {m0_derived:.8e} >= {M0}")
    d0sq = 4.0 * (C6 / math.sqrt(M0) + R0 * R0)
    from .constants import D0

    rep.add("D0_defining_identity", D0 * D0, d0sq, 1e-12 * d0sq,
            detail="D0^2 = 4 [c6 m0^(-1/2) + R0^2]")
    for radius in (1.0, R0):
        val, _ = quad(lambda r: 2.0 * math.pi * r
                      * min(r, radius - r) ** 2, 0.0, radius,
                      points=[radius / 2.0], epsabs=1e-13)
        ref = math.pi * radius ** 4 / 12.0
        rep.add(f"ball_distance_integral_R{radius:g}", val, ref, 1e-10 * ref,
                detail="int_B dist(x, center u boundary)^2 = pi R^4 / 12")
    return rep


def hessian_det_g(v: float, n: float) -> float:
    """Closed form det D^2 g for g(v, n) = v^2 c_n, n continuous:
    8 pi^2 v^2 sec^2(pi/n) / (9 n^6)."""
    return 8.0 * math.pi ** 2 * v * v / (math.cos(math.pi / n) ** 2
                                         * 9.0 * n ** 6)


def verify_hessian_g(rel_tol: float = 1e-4) -> CertificateReport:
    """Finite-difference Hessian of g(v, n) = v^2 c_n against the closed
    form, over a grid of masses and (continuous) edge counts."""
    rep = CertificateReport()

    def g(v, n):
        return v * v * cn(n)

    worst = 0.0
    worst_at = None
    for v in (0.5, 1.0, 2.0, 4.0):
        for n in (4.0, 5.0, 6.0, 8.0, 12.0, 20.0):
            hv = 1e-4 * max(1.0, v)
            hn = 1e-3 * n
            gvv = (g(v + hv, n) - 2.0 * g(v, n) + g(v - hv, n)) / hv ** 2
            gnn = (g(v, n + hn) - 2.0 * g(v, n) + g(v, n - hn)) / hn ** 2
            gvn = (g(v + hv, n + hn) - g(v + hv, n - hn)
                   - g(v - hv, n + hn) + g(v - hv, n - hn)) / (4 * hv * hn)
            det_fd = gvv * gnn - gvn * gvn
            det_cf = hessian_det_g(v, n)
            err = abs(det_fd - det_cf) / abs(det_cf)
            if err > worst:
                worst = err
                worst_at = (v, n)
    rep.add("hessian_det_fd_worst_rel_err", worst, 0.0, rel_tol,
            detail=f"worst finite-difference mismatch at (v, n) = {worst_at}")
    rep.add("d2g_dv2_at_n6", 2.0 * cn(6.0), 2.0 * C6, 1e-14,
            detail="d2g/dv2 = 2 c_n > 0")
    rep.add_flag("hessian_det_positive",
                 all(hessian_det_g(v, n) > 0
                     for v in (0.5, 1, 4) for n in (3.5, 6, 50)),
                 detail="closed form positive on samples")
    return rep


# ---------------------------------------------------------------------------
# scaled-lattice trial scaling


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def scaled_lattice_product(domain_poly: ConvexPolygon, m: int,
                           offset=None, rotation=None) -> dict:
    """Build the trial measure from Voronoi cells of the lattice scaled to
    density m, cropped to a unit-area domain; return support size N, exact
    transport cost W of the trial, the product N*W, and the boundary-cell
    count.

    The cropped Voronoi partition is optimal for the masses it induces (its
    zero weights are the dual certificate), so W is exact. By default each
    density gets a deterministic golden-sequence translate and rotation of
    the lattice, which decorrelates domain-edge alignments across densities;
    grazing alignments otherwise make the boundary count, and with it the
    excess, jump erratically in m.
    """
    from .analysis import TriangularLattice

    if abs(area(domain_poly) - 1.0) > 1e-9:
        raise ValueError("scaled-lattice products need a unit-area domain")
    s = m ** -0.5
    if offset is None:
        offset = ((0.5 + m * _GOLDEN) % 1.0, (0.5 + m * _GOLDEN ** 2) % 1.0)
    if rotation is None:
        rotation = (m * _GOLDEN % 1.0) * math.pi / 3.0
    lat = TriangularLattice(scale=s, theta=rotation,
                            translation=(offset[0] * s, offset[1] * s))
    v = domain_poly.vertices
    pts = lat.points_in_box(v[:, 0].min(), v[:, 1].min(),
                            v[:, 0].max(), v[:, 1].max(),
                            margin=2.0 * lat.spacing)
    part = cropped_voronoi(domain_poly, pts)
    alive = [i for i, c in enumerate(part.cells) if c is not None]
    n_supp = len(alive)
    w = transport_cost(part, pts)
    b = sum(1 for i in alive if part.boundary_flags[i])
    return {"m": m, "support": n_supp, "W": w, "product": n_supp * w,
            "boundary_cells": b}


def fejes_toth_scaling(domain_poly: ConvexPolygon,
                       m_list=(100, 150, 220, 320, 470, 700, 1000, 1400,
                               2000)
                       ) -> tuple[CertificateReport, list[dict]]:
    """Scaling audit of the product (support size) x (transport cost).

    For each density m the product must stay at or above c6; the excess must
    fit C m^(-1/2) (least squares through the origin, R^2 >= 0.95 against
    the mean baseline), and the boundary-cell count must track sqrt(m).
    """
    rep = CertificateReport()
    rows = [scaled_lattice_product(domain_poly, int(m)) for m in m_list]
    products = np.array([r["product"] for r in rows])
    ms = np.array([r["m"] for r in rows], dtype=float)
    rep.add_flag("product_at_or_above_c6",
                 bool(np.all(products >= C6 - 1e-12)),
                 detail=f"min product {products.min():.8f} vs c6 {C6:.8f}")
    excess = products - C6
    x = ms ** -0.5
    coef = float((excess * x).sum() / (x * x).sum())
    fit = coef * x
    ss_res = float(((excess - fit) ** 2).sum())
    ss_tot = float(((excess - excess.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    rep.add("excess_sqrt_law_R2", r2, 1.0, 0.05,
            detail=f"excess ~ {coef:.4f} m^(-1/2); R^2 over mean baseline")
    bcounts = np.array([r["boundary_cells"] for r in rows], dtype=float)
    ratio = bcounts / np.sqrt(ms)
    rep.add("boundary_cells_sqrt_m_ratio_max", float(ratio.max()), None,
            math.inf, deviation=0.0, passed=bool(np.isfinite(ratio).all()),
            detail=f"b(m)/sqrt(m) in [{ratio.min():.3f}, {ratio.max():.3f}]")
    for r in rows:
        r["excess"] = r["product"] - C6
    return rep, rows


def run_all(n_max_cn: int = 12, convexity_v_points: int = 10000,
            convexity_n_max: int = 1000, fejes_domain=None,
            fejes_m_list=(100, 200, 400, 700)) -> CertificateReport:
    """All certificate groups in one report (CLI entry)."""
    rep = CertificateReport()
    rep.extend(verify_cn(n_max_cn))
    rep.extend(verify_convexity_bound(convexity_v_points, convexity_n_max))
    rep.extend(verify_polynomial_certificates())
    rep.extend(verify_minv_constants())
    rep.extend(verify_hessian_g())
    if fejes_domain is None:
        fejes_domain = regular_polygon(6)
    frep, _ = fejes_toth_scaling(fejes_domain, fejes_m_list)
    rep.extend(frep)
    return rep

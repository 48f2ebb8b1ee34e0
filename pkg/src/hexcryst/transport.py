"""Semi-discrete quadratic optimal transport between the Lebesgue measure on
the scaled domain and an atomic measure.

The weights are found by maximizing the concave Kantorovich dual

    Phi(w) = sum_i  int_{cell_i(w)} (|x - z_i|^2 + w_i) dx  -  sum_i w_i v_i

with a damped Newton iteration on the gradient  dPhi/dw_i = area_i - v_i.
The Hessian couples sites through shared power-cell edges: the (i, j) entry
is (shared edge length) / (2 |z_i - z_j|), with diagonal entries closing the
row sums to zero. The constant-shift null space is pinned by fixing w_0 = 0,
and a halving line search keeps every cell's area above the standard
feasibility floor (half the smaller of the initial areas and the target
masses), under which Newton converges globally.

brute_force_ot is an independent oracle: it discretizes the domain into
equal-mass grid samples and hands the resulting finite transportation LP to
HiGHS. It shares no geometry with the power-diagram path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import TOL_GEOM, second_moment
from .tessellation import (CellPartition, DomainSpec, RawDiagram,
                           _diagram, _materialize)


class TransportError(RuntimeError):
    pass


class NonConvergence(TransportError):
    """Newton ran out of iterations or line-search headroom."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EmptyCellUnrecoverable(TransportError):
    """Damping could not restore a partition with all cells nonempty."""


class InstanceTooLarge(ValueError):
    """Brute-force oracle limits exceeded (grid_n <= 400, sites <= 8)."""


@dataclass(frozen=True)
class AtomicMeasure:
    """Point masses v_i > 0 at pairwise-distinct points z_i."""

    points: np.ndarray
    masses: np.ndarray

    def __init__(self, points, masses):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = np.asarray(masses, dtype=float).reshape(-1)
        if pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite (n, 2)")
        if len(m) != len(pts) or not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise ValueError("masses must be positive and finite, one per point")
        pts = pts.copy()
        m = m.copy()
        pts.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", m)

    def __len__(self) -> int:
        return len(self.masses)


def validate_measure(domain: DomainSpec, measure: AtomicMeasure,
                     mass_rtol: float = 1e-8) -> np.ndarray:
    """Check the measure against its domain; returns wrapped points.

    Total mass must match the scaled domain area to mass_rtol (relative);
    points must lie inside and be pairwise distinct.
    """
    total = float(measure.masses.sum())
    if abs(total - domain.area) > mass_rtol * max(1.0, domain.area):
        raise ValueError(
            f"measure mass {total} does not match domain area {domain.area}")
    pts = domain.wrap(measure.points)
    if not np.all(domain.contains(pts)):
        raise ValueError("measure has points outside the domain")
    if len(pts) > 1:
        from scipy.spatial import cKDTree

        if cKDTree(pts).query(pts, k=2)[0][:, 1].min() <= TOL_GEOM:
            raise ValueError("measure points are not pairwise distinct")
    return pts


@dataclass(frozen=True)
class TransportSolution:
    weights: np.ndarray
    partition: CellPartition
    cost: float
    iterations: int
    residual: float          # max_i |area_i - v_i| / v_i
    dual_values: tuple[float, ...]  # Phi per accepted iterate, non-decreasing


def _dual_value(diag: RawDiagram, w: np.ndarray, v: np.ndarray) -> float:
    return float(diag.site_moments.sum() + w @ (diag.areas - v))


def _area_jacobian(diag: RawDiagram) -> np.ndarray:
    """Dense Jacobian d(areas)/d(weights): off-diagonal entries are
    edge_length / (2 site_distance), rows sum to zero. Negative
    semidefinite with the constant-shift null space."""
    n = diag.n
    J = np.zeros((n, n))
    for i, recs in enumerate(diag.edges):
        for other, elen, dist in recs:
            if other != i:
                J[i, other] += elen / (2.0 * dist)
    J = 0.5 * (J + J.T)
    np.fill_diagonal(J, 0.0)
    np.fill_diagonal(J, -J.sum(axis=1))
    return J


def _newton_direction(diag: RawDiagram, g: np.ndarray) -> np.ndarray:
    """Solve J delta = -g with w_0 pinned to zero; J is the area Jacobian."""
    n = len(g)
    delta = np.zeros(n)
    if n == 1:
        return delta
    if n <= 500:
        J = _area_jacobian(diag)
        M = -J[1:, 1:]
        M[np.diag_indices_from(M)] += 1e-12
        delta[1:] = np.linalg.solve(M, g[1:])
    else:
        from scipy import sparse
        from scipy.sparse.linalg import spsolve

        rows, cols, vals = [], [], []
        for i, recs in enumerate(diag.edges):
            for other, elen, dist in recs:
                if other != i:
                    rows.append(i)
                    cols.append(other)
                    vals.append(elen / (2.0 * dist))
        J = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        J = 0.5 * (J + J.T)
        J = J - sparse.diags(np.asarray(J.sum(axis=1)).ravel())
        M = (-J[1:, 1:]).tolil()
        M.setdiag(M.diagonal() + 1e-12)
        delta[1:] = spsolve(M.tocsr(), g[1:])
    return delta


def solve_sdot(domain: DomainSpec, measure: AtomicMeasure,
               tol_mass: float = 1e-8, max_iters: int = 100,
               initial_weights=None) -> TransportSolution:
    """Find weights whose power cells carry exactly the prescribed masses.

    Returns when max_i |area_i - v_i| / v_i <= tol_mass. The cost is the sum
    of per-cell second moments about the sites, which at convergence is the
    quadratic transport cost W of the measure (the converged partition is an
    optimal-map certificate). Masses are rescaled internally by a factor
    1 + O(1e-8) so they sum to the float domain area.
    """
    if not 0.0 < tol_mass <= 1e-2:
        raise ValueError("tol_mass must lie in (0, 1e-2]")
    pts = validate_measure(domain, measure)
    n = len(pts)
    A = domain.area
    v = measure.masses * (A / measure.masses.sum())

    w = np.zeros(n)
    if initial_weights is not None:
        w = np.asarray(initial_weights, dtype=float).copy()
        if w.shape != (n,) or not np.all(np.isfinite(w)):
            raise ValueError("initial_weights must be finite with one entry per site")
    diag = _diagram(domain, pts, w)
    if diag.empty_cells().any() and initial_weights is not None:
        w = np.zeros(n)  # warm start infeasible; Voronoi always is
        diag = _diagram(domain, pts, w)
    if diag.empty_cells().any():
        raise EmptyCellUnrecoverable("empty cell in the initial Voronoi diagram")

    eps0 = 0.5 * min(float(diag.areas.min()), float(v.min()))
    g = diag.areas - v
    gnorm = float(np.linalg.norm(g))
    phi = _dual_value(diag, w, v)
    phis = [phi]
    residual = float(np.max(np.abs(g) / v))
    iterations = 0

    while residual > tol_mass:
        if iterations >= max_iters:
            raise NonConvergence(
                f"no convergence after {max_iters} Newton steps "
                f"(residual {residual:.3g})", residual=residual,
                iterations=iterations)
        delta = _newton_direction(diag, g)
        t = 1.0
        accepted = False
        saw_empty = False
        while t >= 1e-12:
            w_t = w + t * delta
            diag_t = _diagram(domain, pts, w_t)
            if diag_t.empty_cells().any() or diag_t.areas.min() < eps0:
                saw_empty = True
                t *= 0.5
                continue
            g_t = diag_t.areas - v
            gnorm_t = float(np.linalg.norm(g_t))
            phi_t = _dual_value(diag_t, w_t, v)
            if gnorm_t <= (1.0 - 0.5 * t) * gnorm and \
                    phi_t >= phi - 1e-12 * (1.0 + abs(phi)):
                w, diag, g, gnorm, phi = w_t, diag_t, g_t, gnorm_t, phi_t
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if saw_empty:
                raise EmptyCellUnrecoverable(
                    "line search could not keep all cells above the "
                    "feasibility floor")
            raise NonConvergence(
                f"line search stalled at residual {residual:.3g}",
                residual=residual, iterations=iterations)
        phis.append(phi)
        residual = float(np.max(np.abs(g) / v))
        iterations += 1

    w = w - w.min()
    partition = _materialize(diag, torus=domain.is_torus)
    return TransportSolution(weights=w, partition=partition,
                             cost=float(diag.site_moments.sum()),
                             iterations=iterations, residual=residual,
                             dual_values=tuple(phis))


def transport_cost(partition: CellPartition, points) -> float:
    """Sum of second moments of the cells about their sites; empty cells
    contribute nothing."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) != len(partition.cells):
        raise ValueError("one point per cell required")
    total = 0.0
    for cell, z in zip(partition.cells, pts):
        if cell is not None:
            total += second_moment(cell, z)
    return total


def brute_force_ot(domain: DomainSpec, measure: AtomicMeasure,
                   grid_n: int = 200) -> float:
    """Grid-discretized transport cost, solved exactly as a transportation LP.

    The domain is covered by grid_n x grid_n cell centers (points outside a
    polygonal domain are dropped), each carrying equal mass; the LP between
    samples and sites is solved by HiGHS. Converges to the continuous cost
    as grid_n grows; the independent route for checking solve_sdot.
    """
    from scipy import sparse
    from scipy.optimize import linprog

    if grid_n > 400 or grid_n < 2:
        raise InstanceTooLarge("grid_n must lie in [2, 400]")
    if len(measure) > 8:
        raise InstanceTooLarge("brute-force oracle handles at most 8 sites")
    pts = validate_measure(domain, measure)

    x0, y0, x1, y1 = domain.bounding_box()
    xs = x0 + (np.arange(grid_n) + 0.5) * (x1 - x0) / grid_n
    ys = y0 + (np.arange(grid_n) + 0.5) * (y1 - y0) / grid_n
    gx, gy = np.meshgrid(xs, ys)
    samples = np.column_stack([gx.ravel(), gy.ravel()])
    if not domain.is_torus:
        samples = samples[domain.contains(samples)]
    n_s = len(samples)
    if n_s == 0:
        raise TransportError("no grid samples landed inside the domain")

    if domain.is_torus:
        diff = samples[:, None, :] - pts[None, :, :]
        lx, ly = domain.periods
        diff[..., 0] -= lx * np.round(diff[..., 0] / lx)
        diff[..., 1] -= ly * np.round(diff[..., 1] / ly)
        cost = (diff ** 2).sum(-1)
    else:
        cost = ((samples[:, None, :] - pts[None, :, :]) ** 2).sum(-1)

    A = domain.area
    supply = np.full(n_s, A / n_s)
    demand = measure.masses * (A / measure.masses.sum())
    m = len(demand)

    ones = np.ones(n_s * m)
    col = np.arange(n_s * m)
    rows_s = sparse.csr_matrix((ones, (np.repeat(np.arange(n_s), m), col)),
                               shape=(n_s, n_s * m))
    rows_d = sparse.csr_matrix((ones, (np.tile(np.arange(m), n_s), col)),
                               shape=(m, n_s * m))
    # one demand row is redundant given the supply rows; drop it
    A_eq = sparse.vstack([rows_s, rows_d[:-1]])
    b_eq = np.concatenate([supply, demand[:-1]])
    res = linprog(cost.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs-ipm")
    if res.status != 0:
        raise TransportError(f"transportation LP failed: {res.message}")
    return float(res.fun)

"""The particle energy: square-root surface term plus quadratic transport
cost, the partition functional it dominates, per-cell lower bounds, named
constants, and the dimensionless defect.

For a measure with masses v_i on the scaled domain,

    E = 2 c6 sum_i sqrt(v_i) + W,      defect d = E / V_lambda - 3 c6,

and the per-cell chain E >= 2 c6 sum sqrt(v_i) + sum I_i >= sum f(v_i, n_i)
with f(v, n) = 2 c6 sqrt(v) + c_n v^2 underpins every bound checked by the
certify module. On polygonal base domains with at most six sides, d >= 0 up
to solver slack; d = 0 exactly at unit-mass hexagonal configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import constants as _c
from .geometry import area as _area
from .geometry import edge_count, min_second_moment
from .tessellation import CellPartition, DomainSpec
from .transport import AtomicMeasure, TransportSolution, solve_sdot


@dataclass(frozen=True)
class Constants:
    """Named constants; closed forms, not rounded decimals."""

    c6: float = _c.C6
    kappa: float = _c.KAPPA          # d c_n / dn at n = 6, negative
    xi: float = _c.XI
    zeta: float = _c.ZETA
    m1: float = _c.M1                # mass threshold of the convexity bound
    m0: float = _c.M0                # minimizer per-cell mass floor
    R0: float = _c.R0                # maximal hole radius
    D0: float = _c.D0                # cell diameter bound
    lattice_spacing: float = _c.LATTICE_SPACING    # 2^(1/2) 3^(-1/4)
    hex_circumradius: float = _c.HEX_CIRCUMRADIUS  # 2^(1/2) 3^(-3/4)
    hex_apothem: float = _c.HEX_APOTHEM


CONSTANTS = Constants()
C6 = _c.C6
KAPPA = _c.KAPPA


def cn(n):
    """Minimal second moment of a unit-area n-gon:
    c_n = (1/2n) (tan(pi/n)/3 + cot(pi/n)).

    Accepts scalars or arrays; n may be non-integer where a bound treats the
    edge count as continuous. Strictly decreasing, with limit 1/(2 pi).
    """
    arr = np.asarray(n, dtype=float)
    if np.any(arr < 3):
        raise ValueError("cn requires n >= 3")
    t = np.tan(np.pi / arr)
    out = (t / 3.0 + 1.0 / t) / (2.0 * arr)
    return float(out) if np.isscalar(n) or arr.ndim == 0 else out


def f(v, n):
    """Per-cell lower bound f(v, n) = 2 c6 sqrt(v) + c_n v^2."""
    varr = np.asarray(v, dtype=float)
    if np.any(varr < 0):
        raise ValueError("f requires v >= 0")
    out = 2.0 * C6 * np.sqrt(varr) + cn(n) * varr * varr
    scalar = np.isscalar(v) and np.isscalar(n)
    return float(out) if scalar else out


def v_lambda(lam: float) -> float:
    """Scaled volume V_lambda = (2 c6 / lambda)^(2/3)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return (2.0 * C6 / lam) ** (2.0 / 3.0)


def solver_slack(V: float, tol_mass: float = 1e-8) -> float:
    """Energy tolerance used when asserting bounds against numerically
    converged transport solutions."""
    return 10.0 * tol_mass * V


@dataclass(frozen=True)
class CellRecord:
    index: int
    mass: float
    edges: int              # n_i
    moment_min: float       # I_i, second moment about the cell centroid
    lower_bound: float      # f(mass, edges)
    site: tuple[float, float]
    boundary: bool


@dataclass(frozen=True)
class EnergyReport:
    surface: float
    transport: float
    total: float
    V_lambda: float
    defect: float
    cells: tuple[CellRecord, ...]
    partition: CellPartition
    weights: np.ndarray
    residual: float
    points: np.ndarray
    masses: np.ndarray


def energy(domain: DomainSpec, measure: AtomicMeasure,
           tol_mass: float = 1e-8, max_iters: int = 100,
           initial_weights=None) -> EnergyReport:
    """Evaluate the energy of an atomic measure by solving its transport
    problem; returns the full per-cell breakdown and the defect."""
    sol = solve_sdot(domain, measure, tol_mass=tol_mass, max_iters=max_iters,
                     initial_weights=initial_weights)
    return report_from_solution(domain, measure, sol)


def report_from_solution(domain: DomainSpec, measure: AtomicMeasure,
                         sol: TransportSolution) -> EnergyReport:
    surface = 2.0 * C6 * float(np.sqrt(measure.masses).sum())
    total = surface + sol.cost
    V = domain.V_lambda
    cells = []
    for i, cell in enumerate(sol.partition.cells):
        v_i = float(measure.masses[i])
        if cell is None:
            cells.append(CellRecord(i, v_i, 0, 0.0, f(v_i, 3),
                                    tuple(measure.points[i]), False))
            continue
        n_i = edge_count(cell)
        moment = min_second_moment(cell)[1]
        cells.append(CellRecord(i, v_i, n_i, moment, f(v_i, max(n_i, 3)),
                                tuple(measure.points[i]),
                                sol.partition.boundary_flags[i]))
    return EnergyReport(surface=surface, transport=sol.cost, total=total,
                        V_lambda=V, defect=total / V - 3.0 * C6,
                        cells=tuple(cells), partition=sol.partition,
                        weights=sol.weights, residual=sol.residual,
                        points=measure.points, masses=measure.masses)


def partition_energy(domain: DomainSpec, partition: CellPartition) -> float:
    """The partition functional F: per cell, 2 c6 sqrt(area) plus the second
    moment minimized over reference points (attained at the centroid).

    F never exceeds the energy of the measure induced by the same cells, with
    equality when every site sits at its cell's centroid.
    """
    total = 0.0
    for cell in partition.cells:
        if cell is None:
            continue
        a = _area(cell)
        total += 2.0 * C6 * math.sqrt(a) + min_second_moment(cell)[1]
    return total


def cell_lower_bound_sum(report: EnergyReport) -> float:
    """Sum of f(v_i, n_i) over cells; never exceeds the total energy beyond
    solver slack."""
    return float(sum(r.lower_bound for r in report.cells))

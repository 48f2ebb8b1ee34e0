"""Crystallization diagnostics: Euler edge-count audit, per-cell closeness
to the regular hexagon, triangular-lattice fitting, and the stability report
combining them.

The reference structure is the unit-density triangular lattice, generated by
12^(-1/4) [[2, 1], [0, sqrt(3)]], whose Voronoi cells are unit-area regular
hexagons; its neighbor spacing is 2^(1/2) 3^(-1/4) = sqrt(3) times the
hexagon circumradius 2^(1/2) 3^(-3/4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HEX_APOTHEM, HEX_CIRCUMRADIUS, LATTICE_SPACING
from .geometry import ConvexPolygon, area, centroid, edge_count
from .tessellation import CellPartition, DomainSpec


class DegenerateFit(ValueError):
    """Bond-angle histogram has no dominant orientation mode."""


# ---------------------------------------------------------------------------
# triangular lattice


def _generator() -> np.ndarray:
    return 12.0 ** -0.25 * np.array([[2.0, 1.0], [0.0, math.sqrt(3.0)]])


@dataclass(frozen=True)
class TriangularLattice:
    """Unit-density triangular lattice, optionally rotated and translated."""

    theta: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0  # multiplies the generator; 1.0 gives density 1

    @property
    def spacing(self) -> float:
        return LATTICE_SPACING * self.scale

    @property
    def generator(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]]) @ _generator() * self.scale

    def points_in_box(self, xmin: float, ymin: float, xmax: float,
                      ymax: float, margin: float = 0.0) -> np.ndarray:
        """All lattice points inside the padded axis-aligned box."""
        g = self.generator
        t = np.asarray(self.translation, dtype=float)
        corners = np.array([[xmin - margin, ymin - margin],
                            [xmax + margin, ymin - margin],
                            [xmax + margin, ymax + margin],
                            [xmin - margin, ymax + margin]])
        k = np.linalg.solve(g, (corners - t).T).T
        k0 = np.floor(k.min(axis=0)).astype(int) - 1
        k1 = np.ceil(k.max(axis=0)).astype(int) + 1
        ii, jj = np.meshgrid(np.arange(k0[0], k1[0] + 1),
                             np.arange(k0[1], k1[1] + 1))
        pts = np.column_stack([ii.ravel(), jj.ravel()]) @ g.T + t
        keep = ((pts[:, 0] >= xmin - margin) & (pts[:, 0] <= xmax + margin) &
                (pts[:, 1] >= ymin - margin) & (pts[:, 1] <= ymax + margin))
        return pts[keep]

    def nearest_distances(self, points: np.ndarray) -> np.ndarray:
        """Distance from each query point to its nearest lattice site."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        g = self.generator
        t = np.asarray(self.translation, dtype=float)
        k = np.linalg.solve(g, (pts - t).T).T
        kr = np.floor(k)
        best = np.full(len(pts), np.inf)
        # rounding in oblique coordinates can miss the true nearest site;
        # scan the 3x3 integer neighborhood
        for di in (-1, 0, 1, 2):
            for dj in (-1, 0, 1, 2):
                cand = (kr + [di, dj]) @ g.T + t
                d = np.hypot(*(pts - cand).T)
                best = np.minimum(best, d)
        return best


# ---------------------------------------------------------------------------
# Euler audit


@dataclass(frozen=True)
class EulerCheck:
    avg_edges: float
    bound: float
    passed: bool
    n_cells: int


def euler_check(partition: CellPartition, domain: DomainSpec) -> EulerCheck:
    """Average polygon edge count against 6 - (6 - S)/n (6 exactly on tori).

    Edge counts come straight off the cell polygons, whose clipping keeps
    collinear vertices where a neighboring constraint ends on a straight
    side, matching the planar-graph convention behind the bound.
    """
    counts = [edge_count(c) for c in partition.cells if c is not None]
    if not counts:
        raise ValueError("partition has no nonempty cells")
    n = len(counts)
    if domain.is_torus:
        bound = 6.0
    else:
        s = domain.sides
        if s > 6:
            raise ValueError("Euler bound requires a domain with <= 6 sides")
        bound = 6.0 - (6.0 - s) / n
    avg = float(np.mean(counts))
    return EulerCheck(avg_edges=avg, bound=bound,
                      passed=avg <= bound + 1e-12, n_cells=n)


# ---------------------------------------------------------------------------
# hexagon closeness


def hexagon_closeness(cell: ConvexPolygon) -> float:
    """Deviation of a cell from the unit-area regular hexagon.

    The cell is rescaled to unit area; the twelve center-of-mass distances
    (six to vertices, six to side lines) are compared to the regular
    hexagon's circumradius and apothem, and the worst relative deviation is
    returned. Cells that are not hexagons get math.inf.
    """
    if edge_count(cell) != 6:
        return math.inf
    s = 1.0 / math.sqrt(area(cell))
    c = centroid(cell)
    v = (cell.vertices - c) * s
    w = np.roll(v, -1, axis=0)
    vert_dev = np.abs(np.hypot(v[:, 0], v[:, 1]) / HEX_CIRCUMRADIUS - 1.0)
    e = w - v
    elen = np.hypot(e[:, 0], e[:, 1])
    # distance from the (rescaled) center of mass to each side line
    side_dist = np.abs(v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]) / elen
    side_dev = np.abs(side_dist / HEX_APOTHEM - 1.0)
    return float(max(vert_dev.max(), side_dev.max()))


# ---------------------------------------------------------------------------
# lattice fitting


@dataclass(frozen=True)
class LatticeFit:
    theta: float          # in [0, pi/3)
    translation: tuple[float, float]
    rms: float
    resultant: float      # bond-angle mode strength in [0, 1]


def lattice_fit(points, periods=None, min_resultant: float = 0.3) -> LatticeFit:
    """Fit a rotated, translated copy of the triangular lattice to points.

    The rotation comes from the mean of exp(6 i phi) over nearest-neighbor
    bond angles phi (the lattice's bond directions coincide modulo 60
    degrees); a weak mode raises DegenerateFit. The translation starts by
    snapping the first point onto a lattice site and is then polished with
    the mean residual. rms is the root-mean-square distance from each point
    to the nearest fitted site. With `periods`, bonds and residuals use the
    minimum-image convention.
    """
    from scipy.spatial import cKDTree

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 3:
        raise ValueError("need at least 3 points to fit a lattice")

    if periods is None:
        tree = cKDTree(pts)
        _, idx = tree.query(pts, k=2)
        bonds = pts[idx[:, 1]] - pts
    else:
        lx, ly = periods
        offs = [np.array([ox, oy]) for ox in (-lx, 0.0, lx)
                for oy in (-ly, 0.0, ly)]
        cloud = np.concatenate([pts + o for o in offs])
        tree = cKDTree(cloud)
        # index 0 block of the cloud is the points themselves
        _, idx = tree.query(pts, k=2)
        bonds = cloud[idx[:, 1]] - pts

    phase = np.exp(6j * np.arctan2(bonds[:, 1], bonds[:, 0]))
    mean = phase.mean()
    resultant = float(abs(mean))
    if resultant < min_resultant:
        raise DegenerateFit(
            f"bond-angle mode strength {resultant:.3f} below {min_resultant}")
    theta = float(np.angle(mean) / 6.0) % (math.pi / 3.0)

    lat = TriangularLattice(theta=theta, translation=tuple(pts[0]))
    t = pts[0].copy()
    for _ in range(3):
        lat = TriangularLattice(theta=theta, translation=tuple(t))
        res = _residuals(lat, pts, periods)
        t = t + res.mean(axis=0)
    lat = TriangularLattice(theta=theta, translation=tuple(t))
    res = _residuals(lat, pts, periods)
    rms = float(np.sqrt((res ** 2).sum(axis=1).mean()))
    return LatticeFit(theta=theta, translation=(float(t[0]), float(t[1])),
                      rms=rms, resultant=resultant)


def _residuals(lat: TriangularLattice, pts: np.ndarray, periods) -> np.ndarray:
    """Vector from the nearest fitted lattice site to each point.

    The fitted lattice is infinite, so torus points need no image handling
    here; `periods` only influenced the bond extraction.
    """
    g = lat.generator
    t = np.asarray(lat.translation)
    query = pts
    k = np.linalg.solve(g, (query - t).T).T
    kr = np.floor(k)
    best_d = np.full(len(query), np.inf)
    best = np.zeros_like(query)
    for di in (-1, 0, 1, 2):
        for dj in (-1, 0, 1, 2):
            cand = (kr + [di, dj]) @ g.T + t
            delta = query - cand
            d = (delta ** 2).sum(axis=1)
            take = d < best_d
            best_d[take] = d[take]
            best[take] = delta[take]
    return best


# ---------------------------------------------------------------------------
# stability report


@dataclass(frozen=True)
class StabilityReport:
    defect: float
    cell_deviations: tuple[float, ...]   # hexagon closeness per cell
    good_flags: tuple[bool, ...]
    fraction_defective: float
    fraction_defective_interior: float
    bond_min: float    # neighbor distances relative to the lattice spacing
    bond_max: float
    bond_mean: float
    max_deviation: float                 # max |d/a - 1| over interior bonds
    avg_edges: float
    euler_bound: float
    tau: float


def stability_report(report, domain: DomainSpec,
                     tau: float = 0.05) -> StabilityReport:
    """Assemble the crystallinity diagnostics for a converged result.

    `report` is an EnergyReport (or anything carrying .defect and
    .partition). A point is good when its cell has exactly six shared edges
    and every bond length sits within (1 +- tau) of the lattice spacing.
    Bond statistics use bonds whose endpoints both avoid the domain
    boundary, falling back to all bonds when none qualify.
    """
    report = getattr(report, "report", report)
    part: CellPartition = report.partition
    a = LATTICE_SPACING

    n = len(part.cells)
    bonds_per_cell: list[list[float]] = [[] for _ in range(n)]
    for e in part.edges:
        bonds_per_cell[e.cell].append(e.distance)

    good = []
    for i in range(n):
        if part.cells[i] is None:
            good.append(False)
            continue
        b = bonds_per_cell[i]
        good.append(len(b) == 6 and
                    all(abs(d / a - 1.0) <= tau for d in b))
    good_arr = np.array(good, dtype=bool)

    interior = ~np.array(part.boundary_flags, dtype=bool)
    interior &= np.array([c is not None for c in part.cells])
    frac = 1.0 - float(good_arr.mean()) if n else 1.0
    if interior.any():
        frac_int = 1.0 - float(good_arr[interior].mean())
    else:
        frac_int = frac

    stat_bonds = [e.distance for e in part.edges
                  if interior[e.cell] and (0 <= e.other < n) and interior[e.other]]
    if not stat_bonds:
        stat_bonds = [e.distance for e in part.edges]
    rel = np.array(stat_bonds) / a if stat_bonds else np.array([np.nan])

    devs = tuple(hexagon_closeness(c) if c is not None else math.inf
                 for c in part.cells)
    euler = euler_check(part, domain)
    return StabilityReport(
        defect=float(report.defect),
        cell_deviations=devs,
        good_flags=tuple(bool(g) for g in good_arr),
        fraction_defective=frac,
        fraction_defective_interior=frac_int,
        bond_min=float(rel.min()),
        bond_max=float(rel.max()),
        bond_mean=float(rel.mean()),
        max_deviation=float(np.abs(rel - 1.0).max()),
        avg_edges=euler.avg_edges,
        euler_bound=euler.bound,
        tau=tau,
    )

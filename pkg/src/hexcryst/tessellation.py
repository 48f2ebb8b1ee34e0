"""Power diagrams (Laguerre tessellations) of weighted sites, clipped to a
convex polygonal domain or wrapped on a flat torus.

Each cell is the domain intersected with one half-plane per competing site,

    cell_i = domain  ∩  { x : |x - z_i|^2 + w_i  <=  |x - z_j|^2 + w_j },

built by sequential half-plane clipping. Candidates are visited in order of
increasing distance with a radius-based early exit, which leaves the output
identical to the full quadratic scan but touches only a handful of nearby
sites per cell. The torus construction replicates sites into the 3x3 block
of period images and keeps the central copy's cell; it is exact whenever
every cell's circumradius stays below half the shorter period, which is
checked.

The clipping kernel runs on plain float tuples: cells have ~6-12 vertices
and small-array numpy overhead dominates at that size. Edge provenance
labels ride through every clip, so shared-edge lengths (transport Hessian),
cell adjacency, and boundary flags all come out of one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C6
from .geometry import TOL_GEOM, ConvexPolygon, area, edge_count, scale


class TessellationError(ValueError):
    pass


class CellTooLarge(TessellationError):
    """A periodic cell reached half the shorter period; add more sites."""


# ---------------------------------------------------------------------------
# domain specification


@dataclass(frozen=True)
class DomainSpec:
    """Base domain (unit area) plus the parameter lambda and its blow-up.

    V_lambda = (2 c6 / lambda)^(2/3); the scaled domain is V^(1/2) times the
    base. For tori the base is the rectangle gamma x 1/gamma with periodic
    identification and `periods` holds the scaled rectangle.
    """

    kind: str
    lam: float
    V_lambda: float
    base: ConvexPolygon | None = None
    scaled: ConvexPolygon | None = None
    gamma: float | None = None
    periods: tuple[float, float] | None = None

    @staticmethod
    def polygon(base: ConvexPolygon, lam: float) -> "DomainSpec":
        if lam <= 0:
            raise TessellationError("lambda must be positive")
        a = area(base)
        if abs(a - 1.0) > 1e-9:
            raise TessellationError(f"base domain area {a} is not 1 within 1e-9")
        v = (2.0 * C6 / lam) ** (2.0 / 3.0)
        return DomainSpec(kind="polygon", lam=lam, V_lambda=v, base=base,
                          scaled=scale(base, math.sqrt(v)))

    @staticmethod
    def torus(gamma: float, lam: float) -> "DomainSpec":
        if gamma <= 0:
            raise TessellationError("torus aspect gamma must be positive")
        if lam <= 0:
            raise TessellationError("lambda must be positive")
        v = (2.0 * C6 / lam) ** (2.0 / 3.0)
        s = math.sqrt(v)
        return DomainSpec(kind="torus", lam=lam, V_lambda=v, gamma=gamma,
                          periods=(s * gamma, s / gamma))

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    @property
    def area(self) -> float:
        """Float area of the scaled domain (equals V_lambda up to roundoff)."""
        if self.is_torus:
            return self.periods[0] * self.periods[1]
        return area(self.scaled)

    @property
    def sides(self) -> int | None:
        """Edge count S of the base polygon; None for tori."""
        return None if self.is_torus else edge_count(self.base)

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Map points into the fundamental rectangle (torus only)."""
        if not self.is_torus:
            return np.asarray(points, dtype=float)
        p = np.asarray(points, dtype=float).copy()
        p[..., 0] %= self.periods[0]
        p[..., 1] %= self.periods[1]
        return p

    def wrap_delta(self, delta: np.ndarray) -> np.ndarray:
        """Minimum-image displacement (torus); identity on polygons."""
        if not self.is_torus:
            return np.asarray(delta, dtype=float)
        d = np.asarray(delta, dtype=float).copy()
        lx, ly = self.periods
        d[..., 0] -= lx * np.round(d[..., 0] / lx)
        d[..., 1] -= ly * np.round(d[..., 1] / ly)
        return d

    def contains(self, points: np.ndarray, tol: float = TOL_GEOM) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_torus:
            return np.ones(len(pts), dtype=bool)
        v = self.scaled.vertices
        w = np.roll(v, -1, axis=0)
        ex, ey = (w - v)[:, 0], (w - v)[:, 1]
        dx = pts[:, None, 0] - v[None, :, 0]
        dy = pts[:, None, 1] - v[None, :, 1]
        cross = ex[None, :] * dy - ey[None, :] * dx
        return np.all(cross >= -tol * (1.0 + np.abs(pts).sum(1))[:, None], axis=1)

    def bounding_box(self) -> tuple[float, float, float, float]:
        if self.is_torus:
            return 0.0, 0.0, self.periods[0], self.periods[1]
        v = self.scaled.vertices
        return float(v[:, 0].min()), float(v[:, 1].min()), \
            float(v[:, 0].max()), float(v[:, 1].max())


def commensurate_torus(k: int) -> DomainSpec:
    """Torus whose scaled periods are k*a by k*a*sqrt(3), holding 2k^2 unit
    hexagonal cells exactly; lambda is chosen so V_lambda = 2k^2."""
    if k < 1:
        raise TessellationError("k must be >= 1")
    gamma = 3.0 ** -0.25
    lam = 2.0 * C6 * (2.0 * k * k) ** -1.5
    return DomainSpec.torus(gamma, lam)


# ---------------------------------------------------------------------------
# weighted sites


class WeightedSites:
    """Site positions with additive power weights, normalized to min w = 0."""

    __slots__ = ("points", "weights")

    def __init__(self, domain: DomainSpec, points, weights=None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise TessellationError("points must be finite (n, 2)")
        pts = domain.wrap(pts)
        if weights is None:
            w = np.zeros(len(pts))
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != len(pts) or not np.all(np.isfinite(w)):
            raise TessellationError("weights must be finite, one per site")
        if not np.all(domain.contains(pts)):
            raise TessellationError("all sites must lie inside the domain")
        if len(pts) > 1:
            from scipy.spatial import cKDTree

            dmin = cKDTree(pts).query(pts, k=2)[0][:, 1].min()
            if dmin <= TOL_GEOM:
                raise TessellationError("sites are not pairwise distinct")
        w = w - w.min()
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class CellEdge:
    """One shared-edge incidence seen from `cell`; `other` is the competing
    site's original index (may equal `cell` across a torus period)."""

    cell: int
    other: int
    length: float
    distance: float  # separation of the two sites (image-aware on tori)


@dataclass(frozen=True)
class CellPartition:
    cells: tuple  # ConvexPolygon | None, one per site
    boundary_flags: tuple[bool, ...]
    edges: tuple[CellEdge, ...]
    domain_area: float
    torus: bool

    @property
    def adjacency(self) -> tuple[tuple[int, int], ...]:
        pairs = {(min(e.cell, e.other), max(e.cell, e.other)) for e in self.edges}
        return tuple(sorted(pairs))

    def degrees(self) -> np.ndarray:
        """Shared edges per cell (domain-boundary edges excluded)."""
        deg = np.zeros(len(self.cells), dtype=int)
        for e in self.edges:
            deg[e.cell] += 1
        return deg

    def areas(self) -> np.ndarray:
        return np.array([0.0 if c is None else area(c) for c in self.cells])


@dataclass(frozen=True)
class NeighborGraph:
    edges: tuple[tuple[int, int], ...]
    degrees: tuple[int, ...]


def adjacency_graph(partition: CellPartition) -> NeighborGraph:
    """Symmetric neighbor graph; a cell's degree counts its shared edges."""
    return NeighborGraph(edges=partition.adjacency,
                         degrees=tuple(int(d) for d in partition.degrees()))


# ---------------------------------------------------------------------------
# clipping kernel (plain floats; hot path)


def _clip_labeled(xs, ys, lbs, nx, ny, off, lab, tol):
    """One Sutherland-Hodgman pass keeping {n.x <= off}; labels ride along.

    lbs[i] names the constraint that produced the edge leaving vertex i.
    Returns the input tuples unchanged (same objects) when the plane does
    not cut, None when nothing survives.
    """
    n = len(xs)
    dist = [xs[k] * nx + ys[k] * ny - off for k in range(n)]
    outside = 0
    for d in dist:
        if d > tol:
            outside += 1
    if outside == 0:
        return xs, ys, lbs
    if outside == n:
        return None
    ox: list[float] = []
    oy: list[float] = []
    ol: list[int] = []
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        di = dist[i]
        dj = dist[j]
        if di <= tol:
            ox.append(xs[i])
            oy.append(ys[i])
            ol.append(lbs[i])
            if dj > tol:
                t = di / (di - dj)
                ox.append(xs[i] + t * (xs[j] - xs[i]))
                oy.append(ys[i] + t * (ys[j] - ys[i]))
                ol.append(lab)
        elif dj <= tol:
            t = di / (di - dj)
            ox.append(xs[i] + t * (xs[j] - xs[i]))
            oy.append(ys[i] + t * (ys[j] - ys[i]))
            ol.append(lbs[i])
    m = len(ox)
    if m < 3:
        return None
    # merge consecutive vertices closer than tol; the merged vertex keeps the
    # later duplicate's out-label so the surviving edge stays attributed
    kx: list[float] = []
    ky: list[float] = []
    kl: list[int] = []
    t2 = tol * tol
    for i in range(m):
        if kx:
            ddx = ox[i] - kx[-1]
            ddy = oy[i] - ky[-1]
            if ddx * ddx + ddy * ddy <= t2:
                kl[-1] = ol[i]
                continue
        kx.append(ox[i])
        ky.append(oy[i])
        kl.append(ol[i])
    while len(kx) > 1:
        ddx = kx[0] - kx[-1]
        ddy = ky[0] - ky[-1]
        if ddx * ddx + ddy * ddy <= t2:
            kl[-1] = kl[0]
            kx.pop(0)
            ky.pop(0)
            kl.pop(0)
        else:
            break
    if len(kx) < 3:
        return None
    return tuple(kx), tuple(ky), tuple(kl)


def _poly_area_raw(xs, ys):
    s = 0.0
    n = len(xs)
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        s += xs[i] * ys[j] - xs[j] * ys[i]
    return 0.5 * s


def _cell_stats(xs, ys, lbs, zx, zy):
    """Fused pass over one cell: area, second moment about the site,
    centroid, shared-edge records [(label, length)], boundary flag."""
    n = len(xs)
    a2 = 0.0   # twice the area
    mom = 0.0  # 12 x second moment about (zx, zy)
    cx = 0.0
    cy = 0.0
    edges = []
    boundary = False
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        ux = xs[i] - zx
        uy = ys[i] - zy
        vx = xs[j] - zx
        vy = ys[j] - zy
        cr = ux * vy - uy * vx
        a2 += cr
        mom += cr * (ux * ux + uy * uy + ux * vx + uy * vy + vx * vx + vy * vy)
        cx += cr * (ux + vx)
        cy += cr * (uy + vy)
        ex = xs[j] - xs[i]
        ey = ys[j] - ys[i]
        if ex * ex + ey * ey > TOL_GEOM * TOL_GEOM:
            lab = lbs[i]
            if lab < 0:
                boundary = True
            else:
                edges.append((lab, math.sqrt(ex * ex + ey * ey)))
    a = 0.5 * a2
    if a <= 0.0:
        return 0.0, 0.0, zx, zy, [], boundary
    return a, mom / 12.0, zx + cx / (3.0 * a2), zy + cy / (3.0 * a2), edges, boundary


class RawDiagram:
    """Per-cell raw results consumed by the transport solver; the public
    CellPartition is materialized from this only on demand."""

    __slots__ = ("n", "rings", "areas", "site_moments", "centroids", "edges",
                 "boundary", "domain_area")

    def __init__(self, n: int, domain_area: float):
        self.n = n
        self.rings = [None] * n          # (xs, ys, lbs) tuples or None
        self.areas = np.zeros(n)
        self.site_moments = np.zeros(n)  # integral of |x - z_i|^2 over cell i
        self.centroids = np.zeros((n, 2))
        self.edges = [[] for _ in range(n)]  # (other_original, length, site_dist)
        self.boundary = np.zeros(n, dtype=bool)
        self.domain_area = domain_area

    def empty_cells(self) -> np.ndarray:
        return np.array([r is None for r in self.rings])


def _build_diagram(pts, wts, cand_pts, cand_wts, cand_orig, dom_area,
                   seed=None, box_ext=None):
    """Core cell loop shared by the planar and periodic constructions.

    pts/wts: the n sites owning cells. cand_*: competitor set (the sites
    themselves, or their 3x3 period images with the central block first);
    cand_orig maps a candidate index to its original site index. Candidate i
    is skipped when building cell i. `seed` is the shared starting polygon
    (planar domain); if None, a box of half-extent box_ext around each site
    seeds the cell instead (periodic mode; validity is checked by the
    caller).
    """
    n = len(pts)
    periodic = seed is None
    diag = RawDiagram(n, dom_area)
    cx_all = cand_pts[:, 0]
    cy_all = cand_pts[:, 1]
    wmin = float(cand_wts.min()) if len(cand_wts) else 0.0
    n_cand = len(cand_pts)
    for i in range(n):
        zx = float(pts[i, 0])
        zy = float(pts[i, 1])
        li = float(wts[i])
        dx = cx_all - zx
        dy = cy_all - zy
        d2 = dx * dx + dy * dy
        mask = np.ones(n_cand, dtype=bool)
        mask[i] = False
        order = np.flatnonzero(mask)
        order = order[np.argsort(d2[order], kind="stable")]
        if periodic:
            ring = ((zx - box_ext, zx + box_ext, zx + box_ext, zx - box_ext),
                    (zy - box_ext, zy - box_ext, zy + box_ext, zy + box_ext),
                    (-1, -2, -3, -4))
        else:
            ring = seed
        mslack = li - wmin
        if mslack < 0.0:
            mslack = 0.0
        r2 = 0.0
        for k in range(len(ring[0])):
            q = (ring[0][k] - zx) ** 2 + (ring[1][k] - zy) ** 2
            if q > r2:
                r2 = q
        for j in order:
            dj2 = float(d2[j])
            d = math.sqrt(dj2)
            r = math.sqrt(r2)
            if d >= r + math.sqrt(r2 + mslack):
                break  # no remaining candidate can cut the cell
            h = (dj2 + float(cand_wts[j]) - li) / (2.0 * d)
            if h >= r:
                continue  # this bisector misses the current cell
            ux = float(dx[j]) / d
            uy = float(dy[j]) / d
            off = ux * zx + uy * zy + h
            clipped = _clip_labeled(ring[0], ring[1], ring[2], ux, uy, off,
                                    int(j), TOL_GEOM)
            if clipped is None:
                ring = None
                break
            if clipped is not ring:
                ring = clipped
                r2 = 0.0
                for k in range(len(ring[0])):
                    q = (ring[0][k] - zx) ** 2 + (ring[1][k] - zy) ** 2
                    if q > r2:
                        r2 = q
        if ring is None:
            continue
        a, mom, gx, gy, raw_edges, bflag = _cell_stats(ring[0], ring[1],
                                                       ring[2], zx, zy)
        if a <= TOL_GEOM:
            continue
        if periodic and bflag:
            raise CellTooLarge(
                f"cell {i} reached the construction box; too few sites "
                "for the 3x3-image method")
        diag.rings[i] = ring
        diag.areas[i] = a
        diag.site_moments[i] = mom
        diag.centroids[i] = (gx, gy)
        diag.boundary[i] = bflag
        recs = diag.edges[i]
        for lab, elen in raw_edges:
            recs.append((int(cand_orig[lab]), elen, math.sqrt(float(d2[lab]))))
    return diag


def _build_polygon_diagram(dom_poly: ConvexPolygon, pts: np.ndarray,
                           wts: np.ndarray) -> RawDiagram:
    dv = dom_poly.vertices
    seed = (tuple(float(x) for x in dv[:, 0]),
            tuple(float(y) for y in dv[:, 1]),
            tuple(-(k + 1) for k in range(len(dv))))
    return _build_diagram(pts, wts, pts, wts, np.arange(len(pts)),
                          dom_area=_poly_area_raw(seed[0], seed[1]), seed=seed)


def _build_torus_diagram(periods: tuple[float, float], pts: np.ndarray,
                         wts: np.ndarray) -> RawDiagram:
    lx, ly = periods
    n = len(pts)
    offs = [(0.0, 0.0)]
    for oy in (-ly, 0.0, ly):
        for ox in (-lx, 0.0, lx):
            if ox != 0.0 or oy != 0.0:
                offs.append((ox, oy))
    image_pts = np.concatenate([pts + np.array(o) for o in offs])
    image_wts = np.tile(wts, len(offs))
    cand_orig = np.tile(np.arange(n), len(offs))
    diag = _build_diagram(pts, wts, image_pts, image_wts, cand_orig,
                          dom_area=lx * ly, seed=None, box_ext=max(lx, ly))
    _validate_torus_diagram(diag, periods, pts, wts)
    return diag


def _validate_torus_diagram(diag: RawDiagram, periods, pts, wts) -> None:
    """Certify that the 3x3-image construction produced the true periodic
    diagram.

    Two failure modes raise CellTooLarge: (a) a cell bounded by no other
    site's bisector wraps all the way around the torus (one effective site),
    and (b) an image outside the 3x3 block could still cut some cell. For
    (b) a cheap sufficient radius test is tried first; only when it is tight
    does the exact check against the 5x5-minus-3x3 ring of images run.
    """
    lx, ly = periods
    n = len(pts)
    wmin = float(wts.min()) if n else 0.0
    radii = np.zeros(n)
    for i, ring in enumerate(diag.rings):
        if ring is None:
            continue
        if not any(other != i for other, _, _ in diag.edges[i]):
            raise CellTooLarge(
                f"cell {i} is bounded only by its own period images; "
                "too few sites for the 3x3-image method")
        r2 = 0.0
        zx, zy = float(pts[i, 0]), float(pts[i, 1])
        for k in range(len(ring[0])):
            q = (ring[0][k] - zx) ** 2 + (ring[1][k] - zy) ** 2
            if q > r2:
                r2 = q
        radii[i] = math.sqrt(r2)
    slack = np.sqrt(radii ** 2 + np.maximum(wts - wmin, 0.0))
    reach = radii + slack  # an image closer than this could cut the cell
    pmin = min(lx, ly)
    if float(reach.max(initial=0.0)) <= pmin:
        return  # every excluded image sits at distance >= pmin
    ring_offs = [(kx * lx, ky * ly)
                 for kx in range(-2, 3) for ky in range(-2, 3)
                 if max(abs(kx), abs(ky)) == 2]
    ring_pts = np.concatenate([pts + np.array(o) for o in ring_offs])
    ring_wts = np.tile(wts, len(ring_offs))
    for i in range(n):
        if diag.rings[i] is None:
            continue
        d2 = ((ring_pts - pts[i]) ** 2).sum(axis=1)
        d = np.sqrt(d2)
        h = (d2 + ring_wts - wts[i]) / (2.0 * d)
        if float(h.min()) < radii[i] - TOL_GEOM:
            raise CellTooLarge(
                f"cell {i} (circumradius {radii[i]:.4g}) can be cut by an "
                "image outside the 3x3 block; too few sites")
    # rings beyond the second sit at distance >= 2 min(lx, ly)
    if float(reach.max(initial=0.0)) > 2.0 * pmin:
        raise CellTooLarge("cells reach beyond the second image ring")


def _diagram(domain: DomainSpec, pts: np.ndarray, wts: np.ndarray) -> RawDiagram:
    if domain.is_torus:
        return _build_torus_diagram(domain.periods, pts, wts)
    return _build_polygon_diagram(domain.scaled, pts, wts)


def _materialize(diag: RawDiagram, torus: bool) -> CellPartition:
    cells = []
    for ring in diag.rings:
        if ring is None:
            cells.append(None)
        else:
            cells.append(ConvexPolygon(np.column_stack([ring[0], ring[1]]),
                                       validate=False))
    edges = []
    for i, recs in enumerate(diag.edges):
        for other, elen, dist in recs:
            edges.append(CellEdge(cell=i, other=other, length=elen,
                                  distance=dist))
    return CellPartition(cells=tuple(cells),
                         boundary_flags=tuple(bool(b) for b in diag.boundary),
                         edges=tuple(edges),
                         domain_area=diag.domain_area,
                         torus=torus)


# ---------------------------------------------------------------------------
# public builders


def power_diagram(domain: DomainSpec, sites: WeightedSites) -> CellPartition:
    """Power diagram of weighted sites clipped to a polygonal domain.

    Empty cells are retained as None entries so weight-repair logic in the
    transport solver can see them.
    """
    if domain.is_torus:
        raise TessellationError("use power_diagram_periodic for torus domains")
    diag = _build_polygon_diagram(domain.scaled, sites.points, sites.weights)
    return _materialize(diag, torus=False)


def power_diagram_periodic(domain: DomainSpec,
                           sites: WeightedSites) -> CellPartition:
    """Periodic power diagram via the 3x3 block of period images.

    Each cell is returned as the convex polygon around its own site in the
    covering plane; the cells tile the torus after reduction modulo periods.
    Raises CellTooLarge when any circumradius reaches half the shorter
    period, the validity threshold of the image construction.
    """
    if not domain.is_torus:
        raise TessellationError("power_diagram_periodic needs a torus domain")
    diag = _build_torus_diagram(domain.periods, sites.points, sites.weights)
    return _materialize(diag, torus=True)


def cropped_voronoi(domain_poly: ConvexPolygon, points) -> CellPartition:
    """Voronoi cells of arbitrary generators clipped to a convex polygon.

    Unlike power_diagram this does not require generators inside the domain;
    generators whose cells miss the polygon get None cells. Used for overlay
    constructions (hexagonal tilings, scaled-lattice trial measures).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    diag = _build_polygon_diagram(domain_poly, pts, np.zeros(len(pts)))
    return _materialize(diag, torus=False)

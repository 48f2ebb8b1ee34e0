"""Energy minimization over point positions, masses, and point count.

The outer loop alternates three moves, each of which cannot increase the
energy beyond solver slack:

  * re-solving the transport problem for the current measure,
  * a Lloyd step moving every site to its cell's center of mass (the
    first-variation stationarity condition of minimizers),
  * a mass update pushed toward the stationarity coupling
    w_i + const = c6 v_i^(-1/2), projected onto the fixed-total simplex and
    accepted only when the energy actually drops.

Points whose mass pins to the floor for three consecutive iterations are
deleted. Initialization uses Halton points (low-discrepancy starts avoid
early empty cells) with equal masses; multi-start keeps the best result
under the (energy, point count) lexicographic order.

hexagonal_trial overlays the unit-area hexagonal tiling on the scaled
domain, cropped at the boundary, and returns the resulting partition with
its energy; it is the analytic competitor used by the upper-bound checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import TriangularLattice
from .constants import C6
from .energy import EnergyReport, partition_energy, report_from_solution
from .geometry import centroid
from .tessellation import (CellPartition, DomainSpec, WeightedSites,
                           cropped_voronoi, power_diagram_periodic)
from .transport import (AtomicMeasure, TransportError, TransportSolution,
                        solve_sdot)


@dataclass(frozen=True)
class MinimizerConfig:
    max_outer_iters: int = 300
    position_tol: float = 1e-7       # max centroid displacement per site
    mass_update_mode: str = "fixed-point"  # or "projected-gradient"
    seed: int = 0
    restarts: int = 1
    tol_mass: float = 1e-8
    mass_tol: float = 1e-6           # stationarity residual on the masses
    newton_max_iters: int = 100

    def __post_init__(self):
        if self.position_tol <= 0 or self.mass_tol <= 0 or self.tol_mass <= 0:
            raise ValueError("tolerances must be positive")
        if self.mass_update_mode not in ("fixed-point", "projected-gradient"):
            raise ValueError(f"unknown mass update {self.mass_update_mode!r}")


@dataclass(frozen=True)
class MinimizerResult:
    measure: AtomicMeasure
    partition: CellPartition
    report: EnergyReport
    history: tuple[float, ...]     # energy after each accepted outer step
    converged: bool
    iterations: int
    seed: int
    rejected_steps: int


@dataclass(frozen=True)
class State:
    """One point of the alternating iteration: a measure plus its converged
    transport solution."""

    domain: DomainSpec
    measure: AtomicMeasure
    solution: TransportSolution

    @property
    def energy(self) -> float:
        return 2.0 * C6 * float(np.sqrt(self.measure.masses).sum()) \
            + self.solution.cost


def _solve_state(domain: DomainSpec, measure: AtomicMeasure,
                 config: MinimizerConfig, warm=None) -> State:
    sol = solve_sdot(domain, measure, tol_mass=config.tol_mass,
                     max_iters=config.newton_max_iters, initial_weights=warm)
    return State(domain=domain, measure=measure, solution=sol)


def lloyd_step(state: State, config: MinimizerConfig | None = None) -> State:
    """Move each site to its cell's center of mass and re-solve.

    Both halves are weakly energy-decreasing: the centroid minimizes the
    cell's second moment, and re-solving can only lower the transport cost
    for the new sites.
    """
    config = config or MinimizerConfig()
    dom = state.domain
    cells = state.solution.partition.cells
    new_pts = np.array([
        centroid(c) if c is not None else state.measure.points[i]
        for i, c in enumerate(cells)])
    new_pts = dom.wrap(new_pts)
    measure = AtomicMeasure(new_pts, state.measure.masses)
    return _solve_state(dom, measure, config, warm=state.solution.weights)


def max_displacement(old: State, new: State) -> float:
    delta = new.measure.points - old.measure.points
    delta = old.domain.wrap_delta(delta)
    return float(np.hypot(delta[:, 0], delta[:, 1]).max())


def _fixed_point_shift(weights: np.ndarray, total: float) -> float:
    """Solve sum_i (c6 / (w_i + s))^2 = total for the scalar s; the sum is
    strictly decreasing in s on s > -min w."""
    from scipy.optimize import brentq

    w = np.asarray(weights, dtype=float)

    def total_mass(s):
        return float(((C6 / (w + s)) ** 2).sum()) - total

    lo = -float(w.min()) + 1e-12
    while total_mass(lo) < 0.0:
        lo *= 0.5
        if abs(lo) < 1e-300:
            lo = 1e-300
            break
    hi = max(1.0, lo * 2 + 1.0)
    while total_mass(hi) > 0.0:
        hi *= 2.0
    return brentq(total_mass, lo, hi, xtol=1e-15, rtol=1e-15)


def _fixed_point_masses(weights: np.ndarray, total: float) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    s = _fixed_point_shift(w, total)
    return (C6 / (w + s)) ** 2


def _stationary_masses(state: State, max_iters: int = 30):
    """Masses satisfying the full stationarity coupling at fixed positions.

    Solves the joint system  areas(w) = (c6/(w+s))^2,  sum (c6/(w+s))^2 =
    total  by damped Newton in (w, s). A line-searched mass descent cannot
    do this: near stationarity the genuine energy decreases fall below the
    transport solver's noise floor, so the coupling must be enforced as an
    equation. Returns (masses, weights) or None when Newton fails.
    """
    from .tessellation import _diagram
    from .transport import _area_jacobian

    dom = state.domain
    pts = state.measure.points
    total = float(state.measure.masses.sum())
    w = state.solution.weights.copy()
    s = _fixed_point_shift(w, total)
    diag = _diagram(dom, pts, w)
    if diag.empty_cells().any():
        return None

    def residual(diag_, w_, s_):
        lf = w_ + s_
        v_fp = (C6 / lf) ** 2
        return np.concatenate([diag_.areas - v_fp,
                               [v_fp.sum() - total]]), v_fp

    G, v_fp = residual(diag, w, s)
    gn = float(np.linalg.norm(G))
    for _ in range(max_iters):
        if gn <= 1e-11 * max(1.0, total):
            return v_fp, w
        lf = w + s
        D = 2.0 * C6 * C6 / lf ** 3
        n = len(w)
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = _area_jacobian(diag) + np.diag(D)
        J[:n, n] = D
        J[n, :n] = -D
        J[n, n] = -D.sum()
        try:
            delta = np.linalg.solve(J, -G)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        improved = False
        while t >= 1e-10:
            w_t = w + t * delta[:n]
            s_t = s + t * delta[n]
            if np.min(w_t + s_t) <= 0.0:
                t *= 0.5
                continue
            diag_t = _diagram(dom, pts, w_t)
            if diag_t.empty_cells().any():
                t *= 0.5
                continue
            G_t, v_fp_t = residual(diag_t, w_t, s_t)
            gn_t = float(np.linalg.norm(G_t))
            if gn_t <= (1.0 - 0.5 * t) * gn:
                w, s, diag, G, gn, v_fp = w_t, s_t, diag_t, G_t, gn_t, v_fp_t
                improved = True
                break
            t *= 0.5
        if not improved:
            return None
    return None


def mass_residual(state: State) -> float:
    """First-order mass stationarity: relative size of
    c6 v_i^(-1/2) - w_i - s with s the mean gap.

    This is the quantity that vanishes at the coupling w_i + s =
    c6 v_i^(-1/2); measuring it through the raw substitution map
    (c6/(w+s))^2 instead would amplify tiny weight errors through the map's
    repelling Jacobian and can report huge values arbitrarily close to
    stationarity.
    """
    target = C6 / np.sqrt(state.measure.masses)
    gap = target - state.solution.weights
    return float(np.max(np.abs(gap - gap.mean()) / target))


def mass_update(state: State, config: MinimizerConfig | None = None,
                max_halvings: int = 8) -> tuple[State, bool]:
    """One mass move toward stationarity, kept only if the energy drops.

    Fixed-point mode targets the masses satisfying the full coupling
    w_i + s = c6 v_i^(-1/2) at the current positions, computed by the joint
    Newton solve in _stationary_masses (the naive substitution iteration
    v <- (c6/(w+s))^2 is repelling whenever the dual response |dw/dv|
    exceeds c6 v^(-3/2)/2, i.e. at any ordinary cell size, so it is useless
    as an update). If that target does not lower the energy even damped, a
    projected-gradient step along -(c6 v^(-1/2) - w - mean) is tried as a
    fallback. Returns the original state with accepted=False only when
    nothing moves downhill.
    """
    config = config or MinimizerConfig()
    directions = []
    v = state.measure.masses
    total = float(v.sum())
    grad = C6 / np.sqrt(v) - state.solution.weights
    grad = grad - grad.mean()
    scale = float(np.abs(grad).max())
    if config.mass_update_mode == "fixed-point":
        solved = _stationary_masses(state)
        if solved is not None:
            directions.append(solved[0] - v)
    if scale > 0:
        # step sized to a quarter of the mean mass along the steepest entry
        directions.append(-grad * (0.25 * total / len(v) / scale))

    floor = 1e-6 * total / len(v)  # positivity floor during iteration
    e0 = state.energy
    for direction in directions:
        t = 1.0
        for _ in range(max_halvings):
            v_try = np.maximum(v + t * direction, floor)
            v_try *= total / v_try.sum()
            try:
                trial = _solve_state(
                    state.domain,
                    AtomicMeasure(state.measure.points, v_try),
                    config, warm=state.solution.weights)
            except TransportError:
                t *= 0.5
                continue
            if trial.energy <= e0:
                return trial, True
            t *= 0.5
    return state, False


def halton_points(n: int, skip: int = 0) -> np.ndarray:
    """First n points of the (2, 3)-Halton sequence in the unit square."""
    def radical_inverse(base, i):
        inv = 0.0
        denom = 1.0
        while i > 0:
            denom *= base
            inv += (i % base) / denom
            i //= base
        return inv

    idx = np.arange(skip + 1, skip + n + 1)
    return np.array([[radical_inverse(2, i), radical_inverse(3, i)]
                     for i in idx])


def _initial_measure(domain: DomainSpec, n: int, seed: int) -> AtomicMeasure:
    """Halton points pushed into the domain, equal masses."""
    rng = np.random.default_rng(np.random.Philox(seed))
    x0, y0, x1, y1 = domain.bounding_box()
    pts = []
    skip = int(rng.integers(0, 1 << 16))
    batch = max(2 * n, 16)
    while len(pts) < n:
        cand = halton_points(batch, skip=skip)
        skip += batch
        cand = np.column_stack([x0 + cand[:, 0] * (x1 - x0),
                                y0 + cand[:, 1] * (y1 - y0)])
        inside = domain.contains(cand)
        for p in cand[inside]:
            pts.append(p)
            if len(pts) == n:
                break
    pts = np.array(pts)
    # tiny seeded jitter decorrelates restarts that share Halton prefixes
    jitter = rng.normal(scale=1e-3 * math.sqrt(domain.area / max(n, 1)),
                        size=pts.shape)
    moved = pts + jitter
    if domain.is_torus:
        pts = domain.wrap(moved)
    else:
        inside = domain.contains(moved)
        pts = np.where(inside[:, None], moved, pts)
    masses = np.full(n, domain.area / n)
    return AtomicMeasure(pts, masses)


def minimize(domain: DomainSpec, n: int, config: MinimizerConfig | None = None,
             init: AtomicMeasure | None = None) -> MinimizerResult:
    """Alternating minimization of the energy with n starting points.

    Runs config.restarts independent starts (the first uses `init` when
    given) and keeps the lexicographically best (energy, point count)
    result. Convergence means the Lloyd displacement fell below
    position_tol and the mass stationarity residual below mass_tol.
    """
    config = config or MinimizerConfig()
    if n < 1:
        raise ValueError("need n >= 1 points")
    best: MinimizerResult | None = None
    for r in range(max(config.restarts, 1)):
        seed = config.seed + r
        if r == 0 and init is not None:
            measure = init
        else:
            measure = _initial_measure(domain, n, seed)
        result = _minimize_once(domain, measure, config, seed)
        if best is None or (result.report.total, len(result.measure)) < \
                (best.report.total, len(best.measure)):
            best = result
    return best


def _minimize_once(domain: DomainSpec, measure: AtomicMeasure,
                   config: MinimizerConfig, seed: int) -> MinimizerResult:
    state = _solve_state(domain, measure, config)
    history = [state.energy]
    rejected = 0
    floor_hits = np.zeros(len(measure), dtype=int)
    converged = False
    iterations = 0

    for iterations in range(1, config.max_outer_iters + 1):
        moved = lloyd_step(state, config)
        disp = max_displacement(state, moved)
        state = moved

        state, accepted = mass_update(state, config)
        if not accepted:
            rejected += 1

        # delete points stuck on the mass floor for three iterations; the
        # threshold matches the positivity floor inside mass_update
        v = state.measure.masses
        v_floor = 1e-6 * domain.area / len(v)
        floor_hits = np.where(v <= v_floor * (1.0 + 1e-9), floor_hits + 1, 0)
        keep = floor_hits < 3
        if not keep.all():
            total = float(v.sum())
            v_kept = v[keep] * (total / v[keep].sum())
            state = _solve_state(
                domain, AtomicMeasure(state.measure.points[keep], v_kept),
                config, warm=state.solution.weights[keep])
            floor_hits = floor_hits[keep]

        history.append(state.energy)
        m_res = mass_residual(state)
        if disp < config.position_tol and m_res < config.mass_tol:
            converged = True
            break

    report = report_from_solution(domain, state.measure, state.solution)
    return MinimizerResult(measure=state.measure,
                           partition=state.solution.partition,
                           report=report, history=tuple(history),
                           converged=converged, iterations=iterations,
                           seed=seed, rejected_steps=rejected)


def scan_point_counts(domain: DomainSpec, counts,
                      config: MinimizerConfig | None = None,
                      threads: int = 1) -> tuple[MinimizerResult, dict]:
    """Exhaustive scan over point counts; ties break toward smaller n.

    Sequential scans warm-start each count from the previous best (extra
    points drawn fresh); with threads > 1 the counts run independently and
    concurrently instead.
    """
    config = config or MinimizerConfig()
    counts = sorted(set(int(c) for c in counts))
    if not counts or counts[0] < 1:
        raise ValueError("counts must be positive integers")

    results: dict[int, MinimizerResult] = {}
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for n, res in pool.map(
                    lambda n: (n, minimize(domain, n, config)), counts):
                results[n] = res
    else:
        prev: MinimizerResult | None = None
        for n in counts:
            init = None
            if prev is not None:
                init = _grow_measure(domain, prev.measure, n, config.seed + n)
            results[n] = minimize(domain, n, config, init=init)
            prev = results[n]
    best_n = min(counts, key=lambda n: (results[n].report.total, n))
    table = {n: results[n].report.total for n in counts}
    return results[best_n], table


def _grow_measure(domain: DomainSpec, measure: AtomicMeasure, n: int,
                  seed: int) -> AtomicMeasure | None:
    """Warm start for a scan step: pad with fresh points (or drop the
    lightest) to reach n, then equalize nothing else."""
    n_old = len(measure)
    total = domain.area
    if n == n_old:
        pts, v = measure.points, measure.masses
    elif n > n_old:
        extra = _initial_measure(domain, n - n_old, seed)
        pts = np.vstack([measure.points, extra.points])
        v = np.concatenate([measure.masses,
                            np.full(n - n_old, measure.masses.mean())])
    else:
        order = np.argsort(measure.masses)[::-1]
        keep = np.sort(order[:n])
        pts, v = measure.points[keep], measure.masses[keep]
    v = v * (total / v.sum())
    try:
        return AtomicMeasure(pts, v)
    except ValueError:
        return None  # coincident after padding; fall back to Halton


# ---------------------------------------------------------------------------
# analytic trial states


def torus_lattice_points(domain: DomainSpec, offset=(0.0, 0.0),
                         rotation: float = 0.0) -> np.ndarray:
    """Triangular-lattice points wrapped onto a torus, deduplicated.

    For commensurate periods (k*a by k*a*sqrt(3)) this returns exactly the
    2 k^2 distinct lattice sites.
    """
    from scipy.spatial import cKDTree

    if not domain.is_torus:
        raise ValueError("torus_lattice_points needs a torus domain")
    lat = TriangularLattice(theta=rotation,
                            translation=(float(offset[0]), float(offset[1])))
    lx, ly = domain.periods
    pts = domain.wrap(lat.points_in_box(0.0, 0.0, lx, ly, margin=1e-9))
    # wrapping folds commensurate columns onto each other; snap near-period
    # coordinates to zero, then dedupe
    tol = 1e-6 * lat.spacing
    for axis, period in ((0, lx), (1, ly)):
        near = pts[:, axis] > period - tol
        pts[near, axis] = 0.0
    keep = np.ones(len(pts), dtype=bool)
    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
    for a, b in pairs:
        if keep[a] and keep[b]:
            keep[max(a, b)] = False
    return pts[keep]


def hexagonal_trial(domain: DomainSpec, offset=(0.0, 0.0),
                    rotation: float = 0.0) -> tuple[CellPartition, float]:
    """Unit-area hexagonal tiling cropped to the domain, with its partition
    energy.

    On polygonal domains the cells are the tiling hexagons intersected with
    the scaled domain (the cropped Voronoi diagram of the tiling centers).
    On a torus the tiling centers are wrapped and the periodic Voronoi
    diagram is returned; for commensurate periods the cells are exact unit
    hexagons and the energy equals 3 c6 V.
    """
    if domain.is_torus:
        pts = torus_lattice_points(domain, offset, rotation)
        sites = WeightedSites(domain, pts)
        part = power_diagram_periodic(domain, sites)
    else:
        lat = TriangularLattice(theta=rotation,
                                translation=(float(offset[0]),
                                             float(offset[1])))
        x0, y0, x1, y1 = domain.bounding_box()
        pts = lat.points_in_box(x0, y0, x1, y1, margin=2.0 * lat.spacing)
        part = cropped_voronoi(domain.scaled, pts)
    return part, partition_energy(domain, part)

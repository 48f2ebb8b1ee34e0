"""Command-line front end: minimize | scan | certify | analyze | render.

Configuration lives in JSON (flags override file values); every emitted file
carries the hash of the resolved numeric configuration, so runs are diffable
and reproducible: one 64-bit seed drives a counter-based generator and
identical configs produce bit-identical numeric outputs. Per-cell tables are
CSV with a single leading comment line; renders are standalone SVG 1.1 with
a y-up coordinate frame.

Exit codes: 0 success, 1 configuration or input errors, 2 solver
non-convergence, 3 failed certificates.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .analysis import StabilityReport, stability_report
from .constants import C6
from .energy import EnergyReport, report_from_solution
from .geometry import ConvexPolygon, area, centroid, edge_count, \
    min_second_moment, regular_polygon, unit_square
from .optimize import MinimizerConfig, MinimizerResult, minimize, \
    scan_point_counts
from .tessellation import DomainSpec, TessellationError, WeightedSites, \
    power_diagram, power_diagram_periodic
from .transport import AtomicMeasure, NonConvergence, TransportError, \
    solve_sdot
from .analysis import hexagon_closeness


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    domain: str = "square"          # name, or path to a domain JSON
    gamma: float = 1.0              # torus aspect when domain == "torus"
    vertices: list | None = None    # inline polygon vertices (unit area)
    lam: float = 2.0 * C6
    n: int | None = None
    scan: list | None = None        # [lo, hi] inclusive
    seed: int = 0
    tol_mass: float = 1e-8
    tau: float = 0.05
    minimizer: dict = field(default_factory=dict)
    out: str = "runs/latest"

    @staticmethod
    def from_file(path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(
                f"{path}: line {e.lineno}, column {e.colno}: {e.msg}")
        except OSError as e:
            raise ConfigError(f"{path}: {e}")
        return RunConfig.from_dict(raw, where=path)

    @staticmethod
    def from_dict(raw: dict, where: str = "<config>") -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"{where}: top level must be an object")
        cfg = RunConfig()
        known = set(cfg.__dataclass_fields__)
        alias = {"lambda": "lam", "n_points": "n"}
        for key, value in raw.items():
            name = alias.get(key, key)
            if name not in known:
                raise ConfigError(f"{where}: unknown field {key!r}")
            setattr(cfg, name, value)
        cfg.validate(where)
        return cfg

    def validate(self, where: str = "<config>") -> None:
        if self.lam <= 0:
            raise ConfigError(f"{where}: field 'lambda' must be positive")
        if self.n is not None and self.n < 1:
            raise ConfigError(f"{where}: field 'n' must be >= 1")
        if self.scan is not None:
            if (not isinstance(self.scan, (list, tuple)) or len(self.scan) != 2
                    or self.scan[0] > self.scan[1] or self.scan[0] < 1):
                raise ConfigError(
                    f"{where}: field 'scan' must be [lo, hi] with 1 <= lo <= hi")
        if not 0 < self.tol_mass <= 1e-2:
            raise ConfigError(f"{where}: field 'tol_mass' out of (0, 1e-2]")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError(f"{where}: field 'seed' must fit in 64 bits")

    def numeric_dict(self) -> dict:
        """The part of the config that determines numeric results."""
        d = asdict(self)
        d.pop("out")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.numeric_dict(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def minimizer_config(self) -> MinimizerConfig:
        allowed = {"max_outer_iters", "position_tol", "mass_update_mode",
                   "restarts", "mass_tol", "newton_max_iters"}
        extra = set(self.minimizer) - allowed
        if extra:
            raise ConfigError(f"unknown minimizer fields {sorted(extra)}")
        return MinimizerConfig(seed=self.seed, tol_mass=self.tol_mass,
                               **self.minimizer)


def build_domain(cfg: RunConfig) -> DomainSpec:
    name = cfg.domain
    if cfg.vertices is not None:
        poly = ConvexPolygon(cfg.vertices)
        if abs(area(poly) - 1.0) > 1e-9:
            raise ConfigError("inline polygon must have unit area")
        return DomainSpec.polygon(poly, cfg.lam)
    if name == "torus":
        return DomainSpec.torus(cfg.gamma, cfg.lam)
    if os.path.exists(name) or name.endswith(".json"):
        try:
            with open(name) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"domain file {name}: {e}")
        if "torus" in raw:
            return DomainSpec.torus(float(raw["torus"]), cfg.lam)
        return DomainSpec.polygon(ConvexPolygon(raw["vertices"]), cfg.lam)
    return DomainSpec.polygon(named_shape(name), cfg.lam)


def named_shape(name: str) -> ConvexPolygon:
    """square | regular-hexagon | regular-<k>-gon | disk-approx-<k>,
    all normalized to unit area."""
    if name == "square":
        return unit_square()
    if name == "regular-hexagon":
        return regular_polygon(6)
    for prefix, fmt in (("regular-", "-gon"), ("disk-approx-", "")):
        if name.startswith(prefix):
            core = name[len(prefix):]
            if fmt and core.endswith(fmt):
                core = core[:-len(fmt)]
            try:
                k = int(core)
            except ValueError:
                break
            return regular_polygon(k)
    raise ConfigError(f"unknown domain name {name!r}")


# ---------------------------------------------------------------------------
# serialization helpers


def _json_dump(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_state(path: str, cfg_hash: str, cfg: RunConfig,
                report: EnergyReport) -> None:
    state = {
        "config_hash": cfg_hash,
        "version": __version__,
        "domain": {"name": cfg.domain, "gamma": cfg.gamma,
                   "vertices": cfg.vertices},
        "lambda": cfg.lam,
        "points": report.points.tolist(),
        "masses": report.masses.tolist(),
        "weights": report.weights.tolist(),
        "energy": report.total,
    }
    _json_dump(state, path)


def load_state(path: str) -> tuple[RunConfig, AtomicMeasure, np.ndarray, float]:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"state file {path}: {e}")
    try:
        cfg = RunConfig(domain=raw["domain"]["name"],
                        gamma=raw["domain"].get("gamma", 1.0),
                        vertices=raw["domain"].get("vertices"),
                        lam=raw["lambda"])
        measure = AtomicMeasure(np.array(raw["points"]),
                                np.array(raw["masses"]))
        weights = np.array(raw["weights"], dtype=float)
        energy_total = float(raw["energy"])
    except (KeyError, ValueError) as e:
        raise ConfigError(f"state file {path}: missing or bad field ({e})")
    return cfg, measure, weights, energy_total


def write_cells_csv(path: str, cfg_hash: str, report: EnergyReport) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "x", "y", "mass", "weight", "edges",
                         "second_moment", "hexagon_eps", "boundary_flag"])
        for rec in report.cells:
            cell = report.partition.cells[rec.index]
            eps = hexagon_closeness(cell) if cell is not None else math.inf
            writer.writerow([
                rec.index, repr(rec.site[0]), repr(rec.site[1]),
                repr(rec.mass), repr(float(report.weights[rec.index])),
                rec.edges, repr(rec.moment_min),
                "inf" if math.isinf(eps) else repr(eps),
                int(rec.boundary)])


# ---------------------------------------------------------------------------
# SVG rendering


def _heat_color(eps: float) -> str:
    """Defect heat scale: blue (regular hexagon) to red (eps >= 0.15);
    gray for non-hexagonal cells."""
    if math.isinf(eps):
        return "#c8c8c8"
    t = min(max(eps / 0.15, 0.0), 1.0)
    lo = (33, 102, 172)
    hi = (178, 24, 43)
    rgb = tuple(round(a + t * (b - a)) for a, b in zip(lo, hi))
    return "#%02x%02x%02x" % rgb


def render_svg(path: str, cfg_hash: str, domain: DomainSpec,
               report: EnergyReport) -> None:
    """Domain outline, cells colored by hexagon closeness, site dots.

    The viewBox is the padded bounding box; a y-flip group makes the
    coordinate frame y-up.
    """
    x0, y0, x1, y1 = domain.bounding_box()
    pad = 0.05 * max(x1 - x0, y1 - y0)
    x0 -= pad
    y0 -= pad
    x1 += pad
    y1 += pad
    w = x1 - x0
    h = y1 - y0
    stroke = 0.004 * max(w, h)

    parts = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="720" height="{720 * h / w:.0f}" '
        f'viewBox="{x0:.6g} {-y1:.6g} {w:.6g} {h:.6g}">')
    parts.append(f"<desc>hexcryst render config_hash={cfg_hash}</desc>")
    parts.append('<g transform="scale(1,-1)">')

    def path_of(poly: ConvexPolygon) -> str:
        pts = " L".join(f"{p[0]:.8g},{p[1]:.8g}" for p in poly.vertices)
        return f"M{pts} Z"

    for i, cell in enumerate(report.partition.cells):
        if cell is None:
            continue
        eps = hexagon_closeness(cell)
        parts.append(f'<path d="{path_of(cell)}" fill="{_heat_color(eps)}" '
                     f'fill-opacity="0.85" stroke="#202020" '
                     f'stroke-width="{stroke:.4g}"/>')
    if domain.is_torus:
        lx, ly = domain.periods
        parts.append(f'<rect x="0" y="0" width="{lx:.8g}" height="{ly:.8g}" '
                     f'fill="none" stroke="#000" '
                     f'stroke-width="{2 * stroke:.4g}" '
                     f'stroke-dasharray="{6 * stroke:.4g}"/>')
    else:
        parts.append(f'<path d="{path_of(domain.scaled)}" fill="none" '
                     f'stroke="#000" stroke-width="{2 * stroke:.4g}"/>')
    r_dot = 1.2 * stroke
    for p in report.points:
        parts.append(f'<circle cx="{p[0]:.8g}" cy="{p[1]:.8g}" '
                     f'r="{r_dot:.4g}" fill="#111"/>')
    parts.append("</g></svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# report assembly


def _stability_dict(s: StabilityReport) -> dict:
    return {
        "defect": s.defect,
        "fraction_defective": s.fraction_defective,
        "fraction_defective_interior": s.fraction_defective_interior,
        "bond_min": s.bond_min, "bond_max": s.bond_max,
        "bond_mean": s.bond_mean, "max_deviation": s.max_deviation,
        "avg_edges": s.avg_edges, "euler_bound": s.euler_bound,
        "tau": s.tau,
    }


def _energy_dict(rep: EnergyReport) -> dict:
    return {
        "surface": rep.surface, "transport": rep.transport,
        "total": rep.total, "V_lambda": rep.V_lambda,
        "defect": rep.defect, "residual": rep.residual,
        "n_points": len(rep.masses),
    }


def _emit_run(outdir: str, cfg: RunConfig, domain: DomainSpec,
              result: MinimizerResult, timings: dict,
              scan_table: dict | None = None) -> dict:
    os.makedirs(outdir, exist_ok=True)
    cfg_hash = cfg.config_hash()
    rep = result.report
    stab = stability_report(rep, domain, tau=cfg.tau)
    record = {
        "config_hash": cfg_hash,
        "version": __version__,
        "run_id": cfg_hash[:12],
        "config": cfg.numeric_dict(),
        "energy": _energy_dict(rep),
        "stability": _stability_dict(stab),
        "minimizer": {
            "converged": result.converged,
            "iterations": result.iterations,
            "rejected_steps": result.rejected_steps,
            "seed": result.seed,
            "energy_first": rep.total if not result.history
            else result.history[0],
            "energy_last": rep.total,
        },
        "files": {"cells": "cells.csv", "state": "state.json",
                  "render": "render.svg"},
        "timings": timings,
    }
    if scan_table is not None:
        record["scan"] = {str(k): v for k, v in scan_table.items()}
    _json_dump(record, os.path.join(outdir, "report.json"))
    write_cells_csv(os.path.join(outdir, "cells.csv"), cfg_hash, rep)
    write_state(os.path.join(outdir, "state.json"), cfg_hash, cfg, rep)
    render_svg(os.path.join(outdir, "render.svg"), cfg_hash, domain, rep)
    return record


# ---------------------------------------------------------------------------
# commands


def cmd_minimize(cfg: RunConfig, resume: str | None = None,
                 threads: int = 1) -> int:
    domain = build_domain(cfg)
    init = None
    if resume is not None:
        _, measure, _, stored_e = load_state(resume)
        init = measure
    n = cfg.n if cfg.n is not None else max(1, round(domain.V_lambda))
    if init is not None:
        n = len(init)
    t0 = time.time()
    try:
        result = minimize(domain, n, cfg.minimizer_config(), init=init)
    except (NonConvergence, TransportError) as e:
        print(f"solver failed: {e}", file=sys.stderr)
        return 2
    timings = {"minimize_s": round(time.time() - t0, 3)}
    record = _emit_run(cfg.out, cfg, domain, result, timings)
    print(json.dumps({"run_id": record["run_id"],
                      "energy": record["energy"]["total"],
                      "defect": record["energy"]["defect"],
                      "converged": record["minimizer"]["converged"],
                      "out": cfg.out}, sort_keys=True))
    return 0


def cmd_scan(cfg: RunConfig, threads: int = 1) -> int:
    if cfg.scan is None:
        raise ConfigError("scan command needs the 'scan' field or --n A..B")
    domain = build_domain(cfg)
    lo, hi = int(cfg.scan[0]), int(cfg.scan[1])
    t0 = time.time()
    try:
        best, table = scan_point_counts(domain, range(lo, hi + 1),
                                        cfg.minimizer_config(),
                                        threads=threads)
    except (NonConvergence, TransportError) as e:
        print(f"solver failed: {e}", file=sys.stderr)
        return 2
    timings = {"scan_s": round(time.time() - t0, 3)}
    record = _emit_run(cfg.out, cfg, domain, best, timings, scan_table=table)
    print(json.dumps({"run_id": record["run_id"],
                      "best_n": len(best.measure),
                      "energy": record["energy"]["total"],
                      "out": cfg.out}, sort_keys=True))
    return 0


def cmd_certify(cfg: RunConfig) -> int:
    from .certify import run_all

    os.makedirs(cfg.out, exist_ok=True)
    t0 = time.time()
    rep = run_all()
    doc = rep.as_dict()
    doc["config_hash"] = cfg.config_hash()
    doc["version"] = __version__
    doc["timings"] = {"certify_s": round(time.time() - t0, 3)}
    _json_dump(doc, os.path.join(cfg.out, "certificate.json"))
    n_pass = sum(1 for c in rep.checks if c.passed)
    print(f"{n_pass}/{len(rep.checks)} certificate checks passed")
    return 0 if rep.passed else 3


def _load_points_file(path: str) -> np.ndarray:
    try:
        if path.endswith(".json"):
            with open(path) as fh:
                return np.asarray(json.load(fh), dtype=float).reshape(-1, 2)
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                fields = line.replace(",", " ").split()
                if fields[0].lower() in ("x", "cell_id"):
                    continue
                rows.append([float(fields[0]), float(fields[1])])
        if not rows:
            raise ConfigError(f"{path}: no points found")
        return np.array(rows)
    except (OSError, ValueError) as e:
        raise ConfigError(f"points file {path}: {e}")


def cmd_analyze(cfg: RunConfig, points_path: str) -> int:
    domain = build_domain(cfg)
    pts = _load_points_file(points_path)
    if not np.all(domain.contains(domain.wrap(pts))):
        raise ConfigError("points fall outside the scaled domain; "
                          "check --lambda")
    sites = WeightedSites(domain, pts)
    part = (power_diagram_periodic(domain, sites) if domain.is_torus
            else power_diagram(domain, sites))
    areas = part.areas()
    if np.any(areas <= 0):
        raise ConfigError("input points produced empty cells")
    # induced measure: masses are the Voronoi cell areas
    from .energy import CellRecord, f as f_bound
    from .transport import transport_cost

    surface = 2.0 * C6 * float(np.sqrt(areas).sum())
    w_cost = transport_cost(part, sites.points)
    cells = []
    for i, cell in enumerate(part.cells):
        n_i = edge_count(cell)
        cells.append(CellRecord(i, float(areas[i]), n_i,
                                min_second_moment(cell)[1],
                                f_bound(float(areas[i]), max(n_i, 3)),
                                tuple(sites.points[i]),
                                part.boundary_flags[i]))
    rep = EnergyReport(surface=surface, transport=w_cost,
                       total=surface + w_cost, V_lambda=domain.V_lambda,
                       defect=(surface + w_cost) / domain.V_lambda - 3 * C6,
                       cells=tuple(cells), partition=part,
                       weights=sites.weights, residual=0.0,
                       points=sites.points, masses=areas)
    stab = stability_report(rep, domain, tau=cfg.tau)
    os.makedirs(cfg.out, exist_ok=True)
    doc = {"config_hash": cfg.config_hash(), "version": __version__,
           "points_file": os.path.basename(points_path),
           "energy": _energy_dict(rep), "stability": _stability_dict(stab)}
    _json_dump(doc, os.path.join(cfg.out, "stability.json"))
    print(json.dumps({"fraction_defective": stab.fraction_defective,
                      "fraction_defective_interior":
                          stab.fraction_defective_interior,
                      "defect": rep.defect}, sort_keys=True))
    return 0


def cmd_render(cfg: RunConfig, state_path: str) -> int:
    # geometry and lambda come from the state file, not the flags
    state_cfg, measure, weights, _ = load_state(state_path)
    domain = build_domain(state_cfg)
    sol = solve_sdot(domain, measure, tol_mass=cfg.tol_mass,
                     initial_weights=weights)
    rep = report_from_solution(domain, measure, sol)
    os.makedirs(cfg.out, exist_ok=True)
    out = os.path.join(cfg.out, "render.svg")
    render_svg(out, state_cfg.config_hash(), domain, rep)
    print(out)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if args.domain is not None:
        if args.domain.startswith("torus"):
            cfg.domain = "torus"
            if ":" in args.domain:
                cfg.gamma = float(args.domain.split(":", 1)[1])
        else:
            cfg.domain = args.domain
    if args.lam is not None:
        cfg.lam = args.lam
    if args.seed is not None:
        cfg.seed = args.seed
    if args.tol_mass is not None:
        cfg.tol_mass = args.tol_mass
    if args.out is not None:
        cfg.out = args.out
    if getattr(args, "n", None) is not None:
        text = args.n
        if ".." in text:
            lo, hi = text.split("..", 1)
            cfg.scan = [int(lo), int(hi)]
            cfg.n = None
        else:
            cfg.n = int(text)
            cfg.scan = None
    cfg.validate("<flags>")
    return cfg


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hexcryst",
        description="Particle-energy minimization and crystallization audits")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--domain",
                        help="square | regular-hexagon | regular-K-gon | "
                             "disk-approx-K | torus[:GAMMA] | path.json")
        sp.add_argument("--lambda", dest="lam", type=float,
                        help="surface-tension parameter (> 0)")
        sp.add_argument("--seed", type=int, help="64-bit seed")
        sp.add_argument("--tol-mass", dest="tol_mass", type=float)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int,
                        default=int(os.environ.get("HEXCRYST_THREADS", "1")))

    sp = sub.add_parser("minimize", help="minimize the energy")
    common(sp)
    sp.add_argument("--n", help="point count, or A..B to scan")
    sp.add_argument("--resume", help="state.json to continue from")

    sp = sub.add_parser("scan", help="scan a range of point counts")
    common(sp)
    sp.add_argument("--n", help="range A..B", required=False)

    sp = sub.add_parser("certify", help="run all proof-constant certificates")
    common(sp)

    sp = sub.add_parser("analyze", help="stability report for a point set")
    common(sp)
    sp.add_argument("points", help="CSV/JSON file with one x,y pair per row")

    sp = sub.add_parser("render", help="render a run state to SVG")
    common(sp)
    sp.add_argument("state", help="state.json emitted by minimize")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = (RunConfig.from_file(args.config) if args.config
               else RunConfig())
        cfg = _apply_flags(cfg, args)
        if args.command == "minimize":
            if cfg.scan is not None:
                return cmd_scan(cfg, threads=args.threads)
            return cmd_minimize(cfg, resume=args.resume,
                                threads=args.threads)
        if args.command == "scan":
            return cmd_scan(cfg, threads=args.threads)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.points)
        if args.command == "render":
            return cmd_render(cfg, args.state)
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, TessellationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

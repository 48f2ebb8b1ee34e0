import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hexcryst import cli_io
from hexcryst.analysis import TriangularLattice
from hexcryst.constants import C6, LATTICE_SPACING


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def torus_flags(k, out, extra=()):
    gamma = 3.0 ** -0.25
    lam = 2.0 * C6 * (2.0 * k * k) ** -1.5
    return ["minimize", "--domain", f"torus:{gamma}", "--lambda", str(lam),
            "--n", str(2 * k * k), "--out", str(out), "--seed", "5",
            *extra]


# --- config ---------------------------------------------------------------------

def test_config_roundtrip(tmp_path):
    cfg = cli_io.RunConfig(domain="regular-hexagon", lam=0.04, n=12, seed=9,
                           minimizer={"max_outer_iters": 50})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.numeric_dict() | {"out": "x"}))
    cfg2 = cli_io.RunConfig.from_file(str(path))
    assert cfg2.numeric_dict() == cfg.numeric_dict()
    assert cfg2.config_hash() == cfg.config_hash()


def test_malformed_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"domain": "square",\n  "lambda": oops}\n')
    rc = cli_io.main(["minimize", "--config", str(bad)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "line 2" in err


def test_unknown_field_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"domain": "square", "lambada": 3}')
    rc = cli_io.main(["minimize", "--config", str(bad)])
    assert rc == 1
    assert "lambada" in capsys.readouterr().err


def test_named_shapes():
    for name, sides in [("square", 4), ("regular-hexagon", 6),
                        ("regular-5-gon", 5), ("disk-approx-32", 32)]:
        poly = cli_io.named_shape(name)
        from hexcryst.geometry import area, edge_count

        assert edge_count(poly) == sides
        assert area(poly) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(cli_io.ConfigError):
        cli_io.named_shape("pentagram")


# --- minimize command --------------------------------------------------------------

def test_minimize_command_commensurate_torus(tmp_path):
    out = tmp_path / "run"
    rc = cli_io.main(torus_flags(2, out))
    assert rc == 0
    record = read_json(out / "report.json")
    assert record["energy"]["defect"] <= 1e-6
    assert record["minimizer"]["converged"]
    # cells table cross-references the config hash and parses
    lines = (out / "cells.csv").read_text().splitlines()
    assert lines[0] == f"# config_hash={record['config_hash']}"
    header = lines[1].split(",")
    assert header == ["cell_id", "x", "y", "mass", "weight", "edges",
                      "second_moment", "hexagon_eps", "boundary_flag"]
    assert len(lines) == 2 + 8
    # svg parses and references the hash
    tree = ET.parse(out / "render.svg")
    assert record["config_hash"] in ET.tostring(
        tree.getroot(), encoding="unicode")
    polys = [el for el in tree.iter() if el.tag.endswith("path")]
    assert len(polys) >= 8


def test_minimize_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert cli_io.main(torus_flags(2, out)) == 0
    r1, r2 = read_json(out1 / "report.json"), read_json(out2 / "report.json")
    r1.pop("timings")
    r2.pop("timings")
    assert r1 == r2
    assert (out1 / "cells.csv").read_bytes() == (out2 / "cells.csv").read_bytes()
    assert (out1 / "state.json").read_text() == (out2 / "state.json").read_text()
    assert (out1 / "render.svg").read_bytes() == (out2 / "render.svg").read_bytes()


def test_resume_energy_continuity(tmp_path):
    out = tmp_path / "run"
    assert cli_io.main(torus_flags(2, out)) == 0
    state = read_json(out / "state.json")
    cfg, measure, weights, stored = cli_io.load_state(str(out / "state.json"))
    domain = cli_io.build_domain(cfg)
    from hexcryst.transport import solve_sdot

    sol = solve_sdot(domain, measure, initial_weights=weights)
    total = 2.0 * C6 * float(np.sqrt(measure.masses).sum()) + sol.cost
    assert abs(total - stored) <= 1e-12

    out2 = tmp_path / "resumed"
    rc = cli_io.main(torus_flags(2, out2,
                                 extra=["--resume", str(out / "state.json")]))
    assert rc == 0
    resumed = read_json(out2 / "report.json")
    assert resumed["energy"]["total"] <= stored + 1e-12


def test_nonconvergence_exit_code(tmp_path):
    # a 1-step Newton cap cannot converge a nontrivial solve
    out = tmp_path / "run"
    cfg = {"domain": "square", "lambda": 2 * C6 / 60 ** 1.5, "n": 40,
           "seed": 1, "minimizer": {"newton_max_iters": 1,
                                    "max_outer_iters": 5}}
    path = out.with_suffix(".json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg))
    rc = cli_io.main(["minimize", "--config", str(path), "--out", str(out)])
    assert rc == 2


# --- scan ---------------------------------------------------------------------------

def test_scan_command(tmp_path):
    out = tmp_path / "scan"
    lam = 2 * C6 / 6 ** 1.5
    cfg = {"domain": "square", "lambda": lam, "scan": [5, 7], "seed": 2,
           "minimizer": {"max_outer_iters": 40}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    rc = cli_io.main(["scan", "--config", str(path), "--out", str(out)])
    assert rc == 0
    record = read_json(out / "report.json")
    assert set(record["scan"]) == {"5", "6", "7"}
    best = min(record["scan"].values())
    assert record["energy"]["total"] == pytest.approx(best, rel=1e-12)


# --- certify ---------------------------------------------------------------------------

def test_certify_command(tmp_path):
    out = tmp_path / "cert"
    rc = cli_io.main(["certify", "--out", str(out)])
    assert rc == 0
    doc = read_json(out / "certificate.json")
    assert doc["passed"]
    assert all(c["passed"] for c in doc["checks"])


# --- analyze ----------------------------------------------------------------------------

def test_analyze_exact_lattice_window(tmp_path):
    # every lattice point inside the scaled square: cells missing a neighbor
    # then necessarily reach the boundary, so interior cells are perfect
    lam = 2 * C6 / 60 ** 1.5
    side = 60 ** 0.5
    pts = TriangularLattice(translation=(0.3, 0.4)).points_in_box(
        0.0, 0.0, side, side)
    path = tmp_path / "points.csv"
    path.write_text("x,y\n" + "\n".join(f"{p[0]},{p[1]}" for p in pts))
    out = tmp_path / "analysis"
    rc = cli_io.main(["analyze", str(path), "--domain", "square",
                      "--lambda", str(lam), "--out", str(out)])
    assert rc == 0
    doc = read_json(out / "stability.json")
    assert doc["stability"]["fraction_defective_interior"] == 0.0
    assert doc["stability"]["fraction_defective"] < 1.0


def test_analyze_missing_file_exits_1(tmp_path, capsys):
    rc = cli_io.main(["analyze", str(tmp_path / "nope.csv"),
                      "--domain", "square"])
    assert rc == 1


# --- render -----------------------------------------------------------------------------

def test_render_command(tmp_path):
    out = tmp_path / "run"
    assert cli_io.main(torus_flags(2, out)) == 0
    out2 = tmp_path / "render2"
    rc = cli_io.main(["render", str(out / "state.json"), "--out", str(out2)])
    assert rc == 0
    tree = ET.parse(out2 / "render.svg")
    assert tree.getroot().tag.endswith("svg")

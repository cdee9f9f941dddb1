import glob
import json
import os

import percohom as ph
from percohom.cli import main, validate_config


def run_cli(*args):
    return main(list(args))


def only_dir(base, command):
    dirs = glob.glob(os.path.join(base, f"{command}-*"))
    assert len(dirs) >= 1
    return sorted(dirs)[-1]


def test_validate_reports_scale_ordering(capsys):
    code = run_cli("validate", "--command", "sweep", "--preset", "rcm-2d",
                   "--set", "eps_list=[0.75,0.5,0.25]")
    assert code == 0
    diags = json.loads(capsys.readouterr().out)
    assert any("eps << h" in d["message"] for d in diags)


def test_validate_reports_gamma_range(capsys):
    code = run_cli("validate", "--command", "capacity",
                   "--preset", "conductivity-2d", "--set", "gamma=2.5")
    assert code == 0
    diags = json.loads(capsys.readouterr().out)
    assert any("(0, 2)" in d["message"] for d in diags)


def test_validate_clean_preset_is_empty(capsys):
    code = run_cli("validate", "--command", "sweep", "--preset", "rcm-2d")
    assert code == 0
    assert json.loads(capsys.readouterr().out) == []


def test_unknown_key_rejected():
    assert validate_config("sweep", {"bogus": 1}) != []
    code = run_cli("sweep", "--preset", "rcm-2d", "--set", "bogus=1")
    assert code == 2


def test_missing_config_is_validation_error():
    assert run_cli("geometry") == 2


def test_geometry_run_writes_mask_and_stats(tmp_path):
    out = str(tmp_path / "runs")
    assert run_cli("geometry", "--preset", "rcm-2d-demo", "--out", out) == 0
    d = only_dir(out, "geometry")
    mask = ph.load_mask(os.path.join(d, "mask.txt"))
    assert mask.hole_count > 0
    stats = json.load(open(os.path.join(d, "stats.json")))
    assert 0 < stats["volume_fraction"] < 1
    assert stats["component_count"] >= 1
    record = json.load(open(os.path.join(d, "run_record.json")))
    assert record["command"] == "geometry"
    assert record["input_hash"] in d


def test_solve_run_and_field_round_trip(tmp_path):
    out = str(tmp_path / "runs")
    assert run_cli("solve", "--preset", "mms-2d", "--out", out) == 0
    d = only_dir(out, "solve")
    field = ph.load_field(os.path.join(d, "field.txt"))
    exact = ph.GridField.from_expression(field.mask, "sin(pi*x)*sin(pi*y)")
    assert ph.l2_distance(field, exact) < 5e-4
    report = json.load(open(os.path.join(d, "report.json")))
    assert report["final_rel_residual"] <= 1e-10


def test_solver_failure_exit_code(tmp_path):
    out = str(tmp_path / "runs")
    code = run_cli("solve", "--preset", "mms-2d", "--set", 'source="-1"',
                   "--set", "max_iter=3", "--out", out)
    assert code == 3


def test_capacity_ball_oracle_extrapolation(tmp_path):
    import math
    out = str(tmp_path / "runs")
    code = run_cli("capacity", "--preset", "ball-oracle", "--out", out,
                   "--set", "dx_list=[0.08333333333333333,0.041666666666666664]")
    assert code == 0
    d = only_dir(out, "capacity")
    summary = json.load(open(os.path.join(d, "summary.json")))
    exact = 4 * math.pi / (1 / 0.1 - 1 / 1.0)
    assert abs(summary["extrapolated"] - exact) / exact < 0.10


def test_solve_with_grid_source_file(tmp_path):
    import percohom as ph_mod
    mask = ph_mod.hole_free_mask(ph_mod.Box.unit(2), 1.0 / 32)
    src = ph_mod.GridField.constant(mask, -1.0)
    src_path = str(tmp_path / "src.txt")
    ph_mod.save_field(src, src_path)
    cfg = {"mode": "hole-free", "dim": 2, "grid_cells": 32, "domain_side": 1.0,
           "reaction": 1.0, "source_file": src_path, "seed": 0}
    path = tmp_path / "solve.json"
    path.write_text(json.dumps(cfg))
    out = str(tmp_path / "runs")
    assert run_cli("solve", "--config", str(path), "--out", out) == 0
    d = only_dir(out, "solve")
    u_file = ph_mod.load_field(os.path.join(d, "field.txt"))
    u_expr, _ = ph_mod.solve_dirichlet_perforated(mask, 1.0, "-1")
    assert ph_mod.l2_distance(u_file, u_expr) == 0.0


def test_capacity_strange_term_csv_columns(tmp_path):
    out = str(tmp_path / "runs")
    code = run_cli("capacity", "--preset", "strange-3d", "--out", out,
                   "--set", "cells_per_h=12", "--set", "replicas=1")
    assert code == 0
    d = only_dir(out, "capacity")
    header = open(os.path.join(d, "capacity.csv")).readline().strip()
    assert header == "h,eps,seed,cap,cap_per_hn,iterations,dx"
    summary = json.load(open(os.path.join(d, "summary.json")))
    assert {"c", "spread", "eps_then_h", "h_then_eps"} <= set(summary)


def test_ergodic_periodic_preset_zero_column(tmp_path):
    out = str(tmp_path / "runs")
    assert run_cli("ergodic", "--preset", "periodic-2d", "--out", out) == 0
    d = only_dir(out, "ergodic")
    rows = open(os.path.join(d, "decay.csv")).read().splitlines()[1:]
    assert all(line.split(",")[2] == "0" for line in rows)


def test_rerun_is_byte_identical(tmp_path):
    out = str(tmp_path / "runs")
    assert run_cli("ergodic", "--preset", "boolean-2d", "--out", out,
                   "--set", "replicas=4", "--set", "t_list=[2.0,4.0]") == 0
    d = only_dir(out, "ergodic")
    first = open(os.path.join(d, "decay.csv"), "rb").read()
    assert run_cli("ergodic", "--preset", "boolean-2d", "--out", out,
                   "--set", "replicas=4", "--set", "t_list=[2.0,4.0]",
                   "--threads", "2") == 0
    second = open(os.path.join(d, "decay.csv"), "rb").read()
    assert first == second


def test_seed_flag_changes_output_directory(tmp_path):
    out = str(tmp_path / "runs")
    assert run_cli("ergodic", "--preset", "periodic-2d", "--out", out) == 0
    assert run_cli("ergodic", "--preset", "periodic-2d", "--seed", "9", "--out", out) == 0
    assert len(glob.glob(os.path.join(out, "ergodic-*"))) == 2


def test_density_check_run(tmp_path):
    out = str(tmp_path / "runs")
    assert run_cli("density-check", "--preset", "tubes-2d", "--out", out) == 0
    d = only_dir(out, "density-check")
    payload = json.load(open(os.path.join(d, "density.json")))
    assert payload["min_ratio"] <= payload["max_ratio"]


def test_config_file_with_override(tmp_path):
    cfg = {"family": {"kind": "boolean", "dim": 2, "intensity": 2.0,
                      "r0": 0.2, "radius_exponent": 1.0},
           "eps": 0.5, "grid_cells": 64, "domain_side": 1.0, "seed": 3}
    path = tmp_path / "geom.json"
    path.write_text(json.dumps(cfg))
    out = str(tmp_path / "runs")
    assert run_cli("geometry", "--config", str(path),
                   "--set", "family.intensity=8.0", "--out", out) == 0
    d = only_dir(out, "geometry")
    record = json.load(open(os.path.join(d, "run_record.json")))
    assert record["config"]["family"]["intensity"] == 8.0


def test_run_record_config_revalidates(tmp_path):
    out = str(tmp_path / "runs")
    assert run_cli("geometry", "--preset", "boolean-3d-demo", "--out", out) == 0
    d = only_dir(out, "geometry")
    record = json.load(open(os.path.join(d, "run_record.json")))
    assert validate_config("geometry", record["config"]) == []

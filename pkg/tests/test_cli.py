"""Command-line behavior: config validation, artifacts, exit codes, and
byte-level determinism of the machine-readable outputs."""

import json
import os

import pytest

from limabs.cli import main
from limabs.config import load_config

BASE = """
seed = 0

[grid]
h = 0.5
n = 12
r0 = 1.0
obstacle = {{ kind = "sphere", radius = 0.6 }}

[frequency]
omega = 1.0
{frequency_extra}

[source]
kind = "bump"
center = [1.1, 0.0, 0.0]
width = 0.35

[solver]
tol = 1e-10
{solver_extra}
"""


def write_cfg(tmp_path, name="run.toml", frequency_extra="omega_im = 0.5",
              solver_extra="", body=None):
    path = tmp_path / name
    path.write_text(body if body is not None else BASE.format(
        frequency_extra=frequency_extra, solver_extra=solver_extra))
    return str(path)


# ----------------------------------------------------------------------
# config validation

def test_bad_schedule_ratio_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, frequency_extra=(
        "schedule = { sigma0 = 0.5, ratio = 1.5, n_max = 4 }"))
    code = main(["--config", cfg, "--out", str(tmp_path / "out"), "solve"])
    assert code == 2
    assert "schedule.ratio must be in (0,1)" in capsys.readouterr().err


def test_validation_names_section_and_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path, body="[grid]\nh = 0.5\nn = 2\n")
    assert main(["--config", cfg, "solve"]) == 2
    assert "grid.n" in capsys.readouterr().err

    cfg = write_cfg(tmp_path, body='[bc]\nrule = "absorbing"\n')
    assert main(["--config", cfg, "solve"]) == 2
    assert "bc.rule" in capsys.readouterr().err

    cfg = write_cfg(tmp_path, body="[typo_section]\nx = 1\n")
    assert main(["--config", cfg, "solve"]) == 2
    assert "typo_section" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "nope.toml"), "solve"]) == 2
    assert "not found" in capsys.readouterr().err


def test_real_frequency_without_schedule_rejected(tmp_path, capsys):
    cfg = write_cfg(tmp_path, frequency_extra="omega_im = 0.0")
    assert main(["--config", cfg, "solve"]) == 2
    err = capsys.readouterr().err
    assert "omega_im" in err or "schedule" in err


# ----------------------------------------------------------------------
# solve

def test_solve_writes_three_artifacts(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "solve"]) == 0
    names = {"solution.vtk", "solve_record.json", "norms.csv"}
    assert names <= set(os.listdir(out))
    chash = load_config(cfg).hash
    for name in names:
        assert chash in (out / name).read_text()


def test_solve_flags_small_truncation_budget(tmp_path):
    cfg = write_cfg(tmp_path, solver_extra="budget = 2.5")
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "solve"]) == 0
    record = json.loads((out / "solve_record.json").read_text())
    assert record["truncation_flagged"] is True


# ----------------------------------------------------------------------
# verify

def test_verify_suite_passes_and_reports(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "verify",
                 "operators"]) == 0
    text = capsys.readouterr().out
    assert "[pass] operators.self_adjointness" in text
    report = json.loads((out / "verify_report.json").read_text())
    assert report["all_passed"] is True
    assert report["seed"] == 0


def test_verify_unknown_suite_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["--config", cfg, "--out", str(tmp_path / "o"), "verify",
                 "spectra"]) == 2
    assert "unknown verify suite" in capsys.readouterr().err


def test_verify_outputs_byte_identical_across_runs(tmp_path):
    cfg = write_cfg(tmp_path)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["--config", cfg, "--out", str(out), "verify",
                     "operators"]) == 0
        outs.append(out)
    for fname in ("verify_report.json", "verify_report.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_seed_override_changes_hash(tmp_path):
    cfg = write_cfg(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", cfg, "--out", str(out_a), "verify",
                 "operators"]) == 0
    assert main(["--config", cfg, "--out", str(out_b), "--seed", "7",
                 "verify", "operators"]) == 0
    rep_a = json.loads((out_a / "verify_report.json").read_text())
    rep_b = json.loads((out_b / "verify_report.json").read_text())
    assert rep_b["seed"] == 7
    assert rep_a["config_hash"] != rep_b["config_hash"]


# ----------------------------------------------------------------------
# limit

def test_limit_requires_schedule(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["--config", cfg, "--out", str(tmp_path / "o"),
                 "limit"]) == 2
    assert "schedule" in capsys.readouterr().err


def test_limit_writes_table_and_field(tmp_path):
    cfg = write_cfg(tmp_path, frequency_extra=(
        "omega_im = 0.0\n"
        "schedule = { sigma0 = 0.5, ratio = 0.5, n_max = 2 }"))
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "limit"]) == 0
    assert {"limit_table.csv", "limit_record.json",
            "limit_field.vtk"} <= set(os.listdir(out))
    table = (out / "limit_table.csv").read_text()
    assert "gap" in table.splitlines()[0]


# ----------------------------------------------------------------------
# decompose

def test_decompose_geometry_guard(tmp_path, capsys):
    body = BASE.format(frequency_extra="omega_im = 0.5", solver_extra="")
    body = body.replace("r0 = 1.0", "r0 = 1.2").replace(
        "radius = 0.6", "radius = 0.7")
    cfg = write_cfg(tmp_path, body=body)
    assert main(["--config", cfg, "--out", str(tmp_path / "o"),
                 "decompose"]) == 2
    assert "increase grid.n" in capsys.readouterr().err


# ----------------------------------------------------------------------
# spectrum and scalar suite

def test_spectrum_on_empty_box(tmp_path):
    body = BASE.format(frequency_extra="omega_im = 0.5", solver_extra="")
    body = body.replace('obstacle = { kind = "sphere", radius = 0.6 }',
                        'obstacle = "none"')
    cfg = write_cfg(tmp_path, body=body)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "spectrum"]) == 0
    record = json.loads((out / "spectrum.json").read_text())
    assert record["max_abs_imag"] <= 1e-10
    assert (out / "spectrum.csv").exists()


def test_helmholtz_suite_artifacts(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out), "helmholtz"]) == 0
    record = json.loads((out / "scalar_suite.json").read_text())
    assert record["uniformity"] <= 3.0
    csv_text = (out / "scalar_suite.csv").read_text()
    assert csv_text.splitlines()[0].startswith("tau,")

"""Command-line harness: subcommands, exit codes, artifacts, manifest."""

import json

import numpy as np
import pytest

from granular1d import cli_main, run_sweep
from granular1d.cli import load_sweep, sticky_reference
from granular1d.core import load_config, read_fields_csv, sample_initial

BASE_CONFIG = """
epsilon = 0.5
alpha_model = constant
alpha = 0.6
n_particles = 400
n_cells = 10
domain.x_min = 0.0
domain.x_max = 1.0
boundary = free
t_end = 0.4
dt = 0.004
seed = 31415
init.kind = two_state_riemann
init.u_left = 1.0
init.u_right = -1.0
"""

SWEEP_EXTRA = """
sweep.epsilons = 1.0,0.2
sweep.seeds = 1,2
sweep.compare_to_sticky = true
"""


def _write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_dsmc_run_writes_parsable_artifacts(tmp_path):
    cfg = _write_config(tmp_path, BASE_CONFIG)
    out = tmp_path / "out"
    code = cli_main(["dsmc", "run", str(cfg), "--out", str(out), "--quiet", "--snapshots", "5"])
    assert code == 0
    snapshots = read_fields_csv(out / "fields.csv")
    assert len(snapshots) == 5
    diag_lines = (out / "diagnostics.csv").read_text().strip().splitlines()
    assert diag_lines[0].startswith("t,k,eta,mu,L,lambda")
    assert len(diag_lines) == 6


def test_dsmc_event_log_binary(tmp_path):
    cfg = _write_config(tmp_path, BASE_CONFIG)
    out = tmp_path / "out"
    code = cli_main(
        ["dsmc", "run", str(cfg), "--out", str(out), "--quiet", "--event-log", "--snapshots", "3"]
    )
    assert code == 0
    with np.load(out / "events.npz") as log:
        assert len(log["v"]) > 0
        assert log["alpha"].shape == log["v"].shape


def test_sticky_run_writes_clusters_and_fields(tmp_path):
    cfg = _write_config(tmp_path, BASE_CONFIG)
    out = tmp_path / "sticky_out"
    code = cli_main(["sticky", "run", str(cfg), "--out", str(out), "--quiet"])
    assert code == 0
    lines = (out / "clusters.csv").read_text().strip().splitlines()
    assert lines[0] == "t,cluster_id,x,v,m"
    assert len(lines) > 1
    assert read_fields_csv(out / "fields.csv")


def test_sticky_reference_masses_and_projection(tmp_path):
    config = load_config(_write_config(tmp_path, BASE_CONFIG))
    ens = sample_initial(config.init, config.n_particles, config.seed, config.domain)
    traj, fields = sticky_reference(ens, config.grid(), config.t_end)
    assert traj.initial.total_mass == pytest.approx(1.0, rel=1e-12)
    assert traj.initial.momentum == pytest.approx(ens.momentum, rel=1e-12, abs=1e-12)
    assert fields[-1].mass == pytest.approx(1.0, rel=1e-12)


def test_sweep_manifest_complete_and_trends_recorded(tmp_path):
    cfg = _write_config(tmp_path, BASE_CONFIG + SWEEP_EXTRA)
    out = tmp_path / "sweep_out"
    code = cli_main(["sweep", str(cfg), "--out", str(out), "--quiet", "--snapshots", "5"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["spec_echo"]["epsilons"] == [1.0, 0.2]
    assert len(manifest["rows"]) == 4
    for rel in manifest["file_list"]:
        path = out / rel
        assert path.is_file(), rel
        if rel.endswith("fields.csv"):
            assert read_fields_csv(path)
    summary = (out / "summary.csv").read_text().strip().splitlines()
    assert summary[0].startswith("epsilon,seed,monokineticity")
    assert len(summary) == 5


def test_sweep_rerun_and_thread_count_bitwise_identical(tmp_path):
    cfg = _write_config(tmp_path, BASE_CONFIG + SWEEP_EXTRA)
    outs = [tmp_path / f"out{i}" for i in range(3)]
    spec = load_sweep(cfg)
    run_sweep(spec, outs[0], threads=1, n_snapshots=4)
    run_sweep(spec, outs[1], threads=1, n_snapshots=4)
    run_sweep(spec, outs[2], threads=4, n_snapshots=4)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*.csv"))
    assert files
    for rel in files:
        payload = (outs[0] / rel).read_bytes()
        assert payload == (outs[1] / rel).read_bytes(), f"rerun differs: {rel}"
        assert payload == (outs[2] / rel).read_bytes(), f"threads differ: {rel}"


def test_compare_identical_files_reports_zero(tmp_path, capsys):
    cfg = _write_config(tmp_path, BASE_CONFIG)
    out = tmp_path / "out"
    assert cli_main(["dsmc", "run", str(cfg), "--out", str(out), "--quiet", "--snapshots", "3"]) == 0
    code = cli_main(["compare", str(out / "fields.csv"), str(out / "fields.csv")])
    assert code == 0
    assert "W1 = 0.0" in capsys.readouterr().out


def test_config_flag_alternative_to_positional(tmp_path):
    cfg = _write_config(tmp_path, BASE_CONFIG)
    out = tmp_path / "flagged"
    code = cli_main(
        ["dsmc", "run", "--config", str(cfg), "--out", str(out), "--quiet", "--snapshots", "3"]
    )
    assert code == 0
    assert (out / "fields.csv").is_file()


def test_missing_config_argument_exits_one(capsys):
    assert cli_main(["sweep"]) == 1
    assert "configuration file" in capsys.readouterr().err


def test_sweep_monokinetic_data_stays_monokinetic(tmp_path):
    text = BASE_CONFIG.replace("init.kind = two_state_riemann", "init.kind = well_prepared_monokinetic")
    text = text.replace("init.u_left = 1.0", "init.u0 = 0.3").replace("init.u_right = -1.0", "")
    cfg = _write_config(tmp_path, text + "sweep.epsilons = 1.0,0.1\nsweep.seeds = 5\n")
    spec = load_sweep(cfg)
    report = run_sweep(spec, tmp_path / "mono_out", n_snapshots=5)
    dx = spec.base.grid().dx
    for row in report.rows:
        assert row["monokineticity"] == 0.0  # no velocity spread ever appears
        assert row["w1_sticky"] <= dx  # deposition resolution only


def test_missing_config_exits_one_with_path(tmp_path, capsys):
    code = cli_main(["dsmc", "run", str(tmp_path / "absent.cfg")])
    assert code == 1
    assert "absent.cfg" in capsys.readouterr().err


def test_unknown_subcommand_exits_one(capsys):
    assert cli_main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_bad_config_value_exits_one(tmp_path, capsys):
    cfg = _write_config(tmp_path, "epsilon = -2\n")
    assert cli_main(["dsmc", "run", str(cfg)]) == 1
    assert "epsilon" in capsys.readouterr().err


def test_granular_out_env_used_as_root(tmp_path, monkeypatch):
    monkeypatch.setenv("GRANULAR_OUT", str(tmp_path / "root"))
    cfg = _write_config(tmp_path, BASE_CONFIG + "output_dir = exp1\n")
    code = cli_main(["dsmc", "run", str(cfg), "--quiet", "--snapshots", "3"])
    assert code == 0
    assert (tmp_path / "root" / "exp1" / "fields.csv").is_file()


def test_check_subcommand_passes_on_pristine_build():
    assert cli_main(["check", "--quiet"]) == 0

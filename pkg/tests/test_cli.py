import json
import math
import subprocess
import sys

import numpy as np
import pytest

from halanay.cli import (
    GRID_NOTE,
    RunConfig,
    config_to_dict,
    emit_plot_script,
    load_config,
    main,
    run,
)
from halanay.errors import ConfigError
from halanay.halanay import ScanGrid


def write_cfg(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=1))
    return str(path)


def scalar_cfg(**overrides):
    data = {
        "alpha": 0.65,
        "dim": 1,
        "tau": 2.0,
        "analysis": "halanay-scalar",
        "A": [["-0.3"]],
        "B": [["0.2"]],
        "q": "2",
        "phi": ["1+0.2*s"],
        "scan": {"t_max": 50.0, "n_points": 501},
        "solver": {"t_end": 5.0, "h": 0.01},
        "output": {"csv_path": "run.csv", "report_path": "report.json"},
    }
    data.update(overrides)
    return data


# -------------------------------------------------------------- load_config

def test_load_bundled_configs(config_dir):
    for name, analysis, dim in (
        ("example1.json", "positive", 3),
        ("example2.json", "positive", 2),
        ("example3.json", "lmi", 1),
    ):
        cfg = load_config(str(config_dir / name))
        assert isinstance(cfg, RunConfig)
        assert cfg.analysis == analysis
        assert cfg.dim == dim
        assert cfg.scan == ScanGrid(100.0, 2001)
        assert cfg.q_single
        assert len(cfg.A) == dim and len(cfg.A[0]) == dim
    cfg3 = load_config(str(config_dir / "example3.json"))
    assert cfg3.gamma is not None and cfg3.sigma is not None
    assert cfg3.gamma.eval(0.0) == 0.3


def test_config_round_trip(tmp_path, config_dir):
    for name in ("example1.json", "example2.json", "example3.json"):
        cfg = load_config(str(config_dir / name))
        path = write_cfg(tmp_path, config_to_dict(cfg), name)
        assert load_config(path) == cfg
    cfg = load_config(write_cfg(tmp_path, scalar_cfg()))
    assert load_config(write_cfg(tmp_path, config_to_dict(cfg))) == cfg


def test_errors_are_aggregated_with_field_paths(tmp_path):
    bad = scalar_cfg(
        alpha=1.5,
        analysis="lmi",
        A=[["-0.3+u"]],
        extra_key=1,
    )
    del bad["solver"]
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, bad))
    paths = [p for p, _ in exc.value.errors]
    assert "alpha" in paths
    assert "A[0][0]" in paths
    assert "gamma" in paths and "sigma" in paths
    assert "extra_key" in paths
    assert len(paths) >= 5


def test_missing_or_malformed_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.json"))
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    lst = tmp_path / "list.json"
    lst.write_text("[1,2]")
    with pytest.raises(ConfigError):
        load_config(str(lst))


def test_dimension_mismatch_is_reported(tmp_path):
    bad = scalar_cfg(analysis="positive", dim=2, phi=["1", "1"])  # A stays 1x1
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, bad))
    assert any(p == "A" for p, _ in exc.value.errors)


def test_multi_delay_requires_scalar_analysis(tmp_path):
    multi = scalar_cfg(B=[["0.1", "0.1"]], q=["0.5", "1.5"])
    del multi["solver"]
    cfg = load_config(write_cfg(tmp_path, multi))
    assert len(cfg.q) == 2 and not cfg.q_single

    bad = scalar_cfg(analysis="positive", B=[["0.1", "0.1"]], q=["0.5", "1.5"])
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, bad))
    assert any(p == "q" for p, _ in exc.value.errors)


def test_analysis_specific_validation(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, scalar_cfg(analysis="spectral")))
    nolmi = scalar_cfg(analysis="lmi")
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, nolmi))
    assert {"gamma", "sigma"} <= {p for p, _ in exc.value.errors}
    # gamma on a non-lmi analysis is tolerated as long as it parses
    ok = scalar_cfg(gamma="0.3", sigma="0.2")
    assert load_config(write_cfg(tmp_path, ok)).gamma is not None


# ---------------------------------------------------------------------- run

def test_run_verify_reports_certificate_and_envelope(tmp_path, config_dir):
    cfg = load_config(str(config_dir / "example3.json"))
    report, code = run("verify", cfg, out_dir=str(tmp_path))
    assert code == 0
    assert report["analysis"] == "lmi"
    assert report["verdict"]["feasible"]
    assert report["certificate"]["lambda_star"] >= 0.05
    assert report["envelope_check"]["passed"]
    assert report["norm"] == "l2"
    assert report["note"] == GRID_NOTE
    json.dumps(report)  # fully serializable
    csv = tmp_path / "example3.csv"
    assert csv.exists()
    header = csv.read_text().splitlines()[0].split(",")
    assert len(header) == 1 + 5  # dim + 5 bookkeeping columns
    assert (tmp_path / "example3.gp").exists()


def test_run_certify_none_verdict_exits_two(tmp_path):
    cfg = load_config(write_cfg(tmp_path, scalar_cfg(B=[["0.4"]])))
    report, code = run("certify", cfg, out_dir=str(tmp_path))
    assert code == 2
    assert report["certificate"] is None
    assert report["verdict"]["case_tag"] == "NONE"


def test_run_simulate_without_certificate_still_writes_csv(tmp_path):
    cfg = load_config(write_cfg(tmp_path, scalar_cfg(B=[["0.4"]])))
    report, code = run("simulate", cfg, out_dir=str(tmp_path))
    assert code == 0
    data = np.loadtxt(str(tmp_path / "run.csv"), delimiter=",", skiprows=1)
    assert np.all(np.isnan(data[:, -1])) and np.all(np.isnan(data[:, -2]))
    report2, code2 = run("verify", cfg, out_dir=str(tmp_path))
    assert code2 == 2
    assert "envelope_check" not in report2


def test_run_verify_scalar_multi_delay_certifies_but_wont_simulate(tmp_path):
    multi = scalar_cfg(B=[["0.1", "0.1"]], q=["0.5", "1.5"])
    cfg = load_config(write_cfg(tmp_path, multi))
    report, code = run("certify", cfg, out_dir=str(tmp_path))
    assert code == 0
    assert report["certificate"]["lambda_star"] > 0.0
    with pytest.raises(ConfigError):
        run("simulate", cfg, out_dir=str(tmp_path))


def test_run_simulate_requires_solver_section(tmp_path):
    data = scalar_cfg()
    del data["solver"]
    cfg = load_config(write_cfg(tmp_path, data))
    with pytest.raises(ConfigError):
        run("simulate", cfg, out_dir=str(tmp_path))
    _, code = run("certify", cfg, out_dir=str(tmp_path))
    assert code == 0


# --------------------------------------------------------- emit_plot_script

def test_plot_script_contents(tmp_path, config_dir):
    cfg = load_config(str(config_dir / "example1.json"))
    run("simulate", cfg, out_dir=str(tmp_path))
    script = (tmp_path / "example1.gp").read_text()
    for col in (2, 3, 4):  # three state components
        assert f"using 1:{col}" in script
    assert "using 1:7" in script  # envelope = dim + 4
    assert "pause -1" in script
    assert "set datafile separator ','" in script


def test_plot_script_refuses_empty_trajectory(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("t,x1,norm_l1,norm_l2,envelope,ratio\n")
    with pytest.raises(ValueError):
        emit_plot_script(str(empty))
    assert not (tmp_path / "empty.gp").exists()


# --------------------------------------------------------------------- main

def test_main_verify_bundled_config(tmp_path, config_dir, capsys):
    code = main([
        "verify", "--config", str(config_dir / "example3.json"),
        "--out", str(tmp_path),
    ])
    assert code == 0
    out = capsys.readouterr()
    assert "lmi feasibility: True" in out.out
    assert "envelope check:" in out.out
    assert GRID_NOTE in out.err
    report = json.loads((tmp_path / "example3_report.json").read_text())
    assert report["envelope_check"]["passed"]
    # floats survive the JSON round trip exactly
    cfg = load_config(str(config_dir / "example3.json"))
    direct, _ = run("certify", cfg, out_dir=str(tmp_path))
    assert report["certificate"]["lambda_star"] == (
        direct["certificate"]["lambda_star"]
    )


def test_main_exit_codes(tmp_path, config_dir, capsys):
    bad = write_cfg(tmp_path, scalar_cfg(alpha=7.0))
    assert main(["certify", "--config", bad, "--out", str(tmp_path)]) == 1
    assert "config error" in capsys.readouterr().err

    assert main([
        "certify", "--config", str(tmp_path / "missing.json"),
        "--out", str(tmp_path),
    ]) == 1

    none_cfg = write_cfg(tmp_path, scalar_cfg(B=[["0.4"]]))
    assert main(["certify", "--config", none_cfg, "--out", str(tmp_path)]) == 2

    # negative delay-matrix entry: the positivity route refuses outright
    struct = write_cfg(tmp_path, scalar_cfg(analysis="positive", B=[["-0.1"]]))
    assert main(["certify", "--config", struct, "--out", str(tmp_path)]) == 2
    assert "not certifiable" in capsys.readouterr().err


def test_main_mlf_subcommand(capsys):
    assert main(["mlf", "0.65", "1", "-0.0784"]) == 0
    printed = float(capsys.readouterr().out.strip())
    assert printed == pytest.approx(0.9179, abs=5e-4)
    assert main(["mlf", "1.5", "1", "0.0"]) == 1
    assert "error" in capsys.readouterr().err


def test_console_entry_point_golden_run(tmp_path, config_dir):
    proc = subprocess.run(
        [
            sys.executable, "-m", "halanay.cli", "verify",
            "--config", str(config_dir / "example1.json"),
            "--out", str(tmp_path),
        ],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert "column-sum conditions: ratio=True" in proc.stdout
    assert "(RATIO)" in proc.stdout
    assert "report:" in proc.stdout
    assert GRID_NOTE in proc.stderr
    report = json.loads((tmp_path / "example1_report.json").read_text())
    assert report["certificate"]["lambda_star"] >= 0.075
    assert report["certificate"]["w0"] == 0.0
    assert report["envelope_check"]["passed"]
    data = np.loadtxt(str(tmp_path / "example1.csv"), delimiter=",", skiprows=1)
    assert data.shape[1] == 3 + 5
    # simulated l1 norm stays under the certified envelope column
    ratio = data[:, -1]
    assert np.nanmax(ratio) <= 1.02

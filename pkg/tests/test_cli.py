"""Command-line entry points, file outputs, exit codes."""

import json

import numpy as np
import pytest

from spincavity import cli
from spincavity.errors import NumericalFailure
from spincavity.io import (
    DIAGRAM_COLUMNS,
    SUMMARY_COLUMNS,
    TRAJECTORY_COLUMNS,
    read_report,
    read_table,
    write_table,
)

SMALL = ["--set", "ensemble.cluster_count=21"]
WEAK = SMALL + ["--set", "physical.kappa_hz=1.2e+6",
                "--set", "physical.omega_coll_hz=9.6e+6"]


def _run(args):
    return cli.main(args)


def test_steady_reports_the_fold_window(tmp_path):
    out = tmp_path / "s"
    assert _run(["steady", "--outdir", str(out)] + SMALL
                + ["--set", "experiment.steady.power_count=9"]) == 0
    cols, rows = read_table(out / "bistability.csv")
    assert cols == list(DIAGRAM_COLUMNS)
    assert len(rows) == 2 * 9
    report = read_report(out / "folds.json")
    assert report["bistable"] is True
    assert 1.0 < report["width_db"] < 3.0
    assert report["fold_lower_flux"] < report["fold_upper_flux"]
    assert report["c_coll"] > 50.0


def test_steady_on_the_wide_cavity_is_monostable(tmp_path):
    out = tmp_path / "w"
    assert _run(["steady", "--outdir", str(out)] + WEAK
                + ["--set", "experiment.steady.power_count=9"]) == 0
    report = read_report(out / "folds.json")
    assert report["bistable"] is False
    assert report["fold_lower_flux"] is None
    assert report["width_db"] is None


def test_steady_rerun_is_byte_identical(tmp_path):
    args = ["steady"] + SMALL + ["--set", "experiment.steady.power_count=9"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(args + ["--outdir", str(a)]) == 0
    assert _run(args + ["--outdir", str(b)]) == 0
    for name in ("bistability.csv", "folds.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_steady_json_format(tmp_path):
    out = tmp_path / "j"
    assert _run(["steady", "--format", "json", "--outdir", str(out)] + SMALL
                + ["--set", "experiment.steady.power_count=9"]) == 0
    assert (out / "bistability.json").exists()
    assert not (out / "bistability.csv").exists()


def test_quench_above_the_window_keeps_the_upper_branch(tmp_path, capsys):
    out = tmp_path / "q"
    rc = _run(["quench", "--outdir", str(out), "--workers", "1"] + SMALL
              + ["--set", "experiment.quench.targets_db=[2.0]"])
    assert rc == 0
    cols, rows = read_table(out / "quench_summary.csv")
    assert cols == list(SUMMARY_COLUMNS)
    assert len(rows) == 1
    row = dict(zip(cols, rows[0]))
    assert row["branch"] == "upper"
    assert row["t_switch_s"] is None
    assert row["t_steady_s"] > 0.0
    traj_cols, traj_rows = read_table(out / "quench_000.csv")
    assert traj_cols == list(TRAJECTORY_COLUMNS)
    assert len(traj_rows) > 50
    # no lower-branch switching data, so no scaling law either
    assert "scaling fit skipped" in capsys.readouterr().err


def test_quench_cut_short_is_reported_unresolved(tmp_path):
    out = tmp_path / "u"
    rc = _run(["quench", "--outdir", str(out)] + SMALL
              + ["--set", "experiment.quench.targets_db=[-0.05]",
                 "--set", "integrator.max_sim_time=1.0e-2"])
    assert rc == 0
    cols, rows = read_table(out / "quench_summary.csv")
    row = dict(zip(cols, rows[0]))
    assert row["branch"] == "unresolved"
    assert row["t_steady_s"] is None
    assert row["t_switch_s"] is None


def test_quench_rerun_is_byte_identical(tmp_path):
    args = ["quench"] + SMALL \
        + ["--set", "experiment.quench.targets_db=[-0.05]",
           "--set", "integrator.max_sim_time=1.0e-2"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(args + ["--outdir", str(a)]) == 0
    assert _run(args + ["--outdir", str(b)]) == 0
    for name in ("quench_000.csv", "quench_summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_adiabatic_outputs_fixed_points_and_potential(tmp_path):
    out = tmp_path / "a"
    assert _run(["adiabatic", "--outdir", str(out)] + SMALL) == 0
    report = read_report(out / "adiabatic_fixed_points.json")
    points = report["fixed_points"]
    assert len(points) >= 2
    for pt in points:
        assert pt["amplitude"] ** 2 == pytest.approx(pt["intensity"],
                                                     rel=1e-12)
        assert pt["stability"] in ("stable", "unstable", "degenerate")
    with open(out / "adiabatic_potential.csv") as fh:
        header = fh.readline().strip()
    assert header == "x,V,rhs"


def test_adiabatic_uncoupled_limit_has_two_fixed_points(tmp_path):
    out = tmp_path / "a0"
    assert _run(["adiabatic", "--outdir", str(out)] + SMALL
                + ["--set", "experiment.adiabatic.cooperativity=0.0"]) == 0
    report = read_report(out / "adiabatic_fixed_points.json")
    assert len(report["fixed_points"]) == 2


def test_fit_refits_a_summary_table(tmp_path):
    eps = np.geomspace(1e-3, 1e-1, 8)
    rows = [(float(2.5 * (1.0 - e)), float(10.0 * np.log10(1.0 - e)),
             float(1.1 * 3.7 * e ** -1.2), float(3.7 * e ** -1.2), "lower")
            for e in eps]
    summary = tmp_path / "quench_summary.csv"
    write_table(summary, SUMMARY_COLUMNS, rows)
    out = tmp_path / "fit"
    rc = _run(["fit", "--outdir", str(out),
               "--set", f"experiment.fit.summary_csv={summary}",
               "--set", "experiment.fit.critical=2.5"])
    assert rc == 0
    fixed = read_report(out / "scaling_fixed.json")
    free = read_report(out / "scaling_free.json")
    assert fixed["mode"] == "fixed"
    assert fixed["alpha"] == pytest.approx(1.2, abs=1e-9)
    assert fixed["p_crit"] == 2.5
    assert free["mode"] == "free"
    assert free["alpha"] == pytest.approx(1.2, abs=1e-3)


def test_fit_with_no_usable_rows_fails_clearly(tmp_path, capsys):
    rows = [(2.0, -1.0, 5.0, None, "upper"),
            (2.1, -0.8, 5.0, None, "upper"),
            (2.2, -0.6, 5.0, None, "upper"),
            (2.3, -0.4, 5.0, None, "upper")]
    summary = tmp_path / "quench_summary.csv"
    write_table(summary, SUMMARY_COLUMNS, rows)
    rc = _run(["fit", "--outdir", str(tmp_path / "fit"),
               "--set", f"experiment.fit.summary_csv={summary}",
               "--set", "experiment.fit.critical=2.5"])
    assert rc == 2
    assert "no usable" in capsys.readouterr().err


def test_unknown_key_exits_with_the_usage_code(tmp_path, capsys):
    rc = _run(["steady", "--outdir", str(tmp_path),
               "--set", "physical.bogus=1.0"])
    assert rc == 2
    assert "bogus" in capsys.readouterr().err


def test_empty_power_grid_exits_with_the_usage_code(tmp_path):
    rc = _run(["steady", "--outdir", str(tmp_path),
               "--set", "experiment.steady.power_count=0"])
    assert rc == 2


def test_numerical_failure_exits_with_its_own_code(tmp_path, monkeypatch,
                                                   capsys):
    def boom(config, outdir):
        raise NumericalFailure("integrator gave up")

    monkeypatch.setitem(cli._COMMANDS, "steady", boom)
    rc = _run(["steady", "--outdir", str(tmp_path)])
    assert rc == 3
    assert "integrator gave up" in capsys.readouterr().err


def test_help_lists_the_configuration_keys(capsys):
    with pytest.raises(SystemExit) as exit_info:
        _run(["quench", "--help"])
    assert exit_info.value.code == 0
    text = capsys.readouterr().out
    assert "physical.kappa_hz [Hz]" in text
    assert "experiment.quench.ladder_count" in text
    assert "integrator.rel_tol" in text

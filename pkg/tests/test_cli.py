import json

import numpy as np
import pytest

from kbr import cli
from kbr.errors import FitFailed
from kbr.io import SCHEMAS, load_config, read_csv


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def test_converge_emits_monotone_table(tmp_path):
    assert run(tmp_path, "converge", "--fn", "camel1d", "--scheme", "explicit", "--seed", "7",
               "--ns", "100,200,400", "--n-test", "300") == 0
    rows = read_csv(tmp_path / "converge_camel1d_explicit.csv", "convergence")
    assert [r["N"] for r in rows] == [100, 200, 400]
    assert (tmp_path / "converge_camel1d_explicit.svg").read_text().lstrip().startswith("<?xml")
    cfg = load_config(tmp_path / "converge_camel1d_explicit_config.yaml")
    assert cfg["seed"] == 7 and cfg["sweep"]["n_sweep"] == 15
    summary = json.loads((tmp_path / "converge_camel1d_explicit_summary.json").read_text())
    assert "slope_grad" in summary


def test_sod_and_metrics(tmp_path):
    assert run(tmp_path, "pde", "sod", "--scheme", "kbr-roe", "--n", "101", "--t-end", "0.15") == 0
    snap = read_csv(tmp_path / "sod_kbr-roe_snapshots.csv", "euler_snapshot")
    assert len(snap) == 2 * 101
    grid = read_csv(tmp_path / "sod_grid.csv", "grid")
    assert len(grid) == 101
    metrics = read_csv(tmp_path / "sod_metrics.csv", "sod_metrics")
    assert [m["region"] for m in metrics] == ["region1", "region2"]
    first = {m["region"]: m for m in metrics}
    assert run(tmp_path, "metrics", "--snapshot", str(tmp_path / "sod_kbr-roe_snapshots.csv"),
               "--scheme", "kbr-roe") == 0
    again = {m["region"]: m for m in read_csv(tmp_path / "sod_metrics.csv", "sod_metrics")}
    for region in first:
        for key in ("l1", "linf", "post_shock_osc", "tv"):
            assert again[region][key] == pytest.approx(first[region][key], rel=1e-12)


def test_burgers(tmp_path):
    assert run(tmp_path, "pde", "burgers", "--scheme", "maccormack", "--n", "101") == 0
    rows = read_csv(tmp_path / "burgers_maccormack_snapshots.csv", "burgers_snapshot")
    assert rows[-1]["t"] == pytest.approx(0.3)


def test_dnn_table_layout(tmp_path):
    assert run(tmp_path, "dnn-table", "--n", "201", "--n-test", "100", "--n-sweep", "5") == 0
    rows = read_csv(tmp_path / "dnn_table.csv", "dnn_table")
    assert [r["function"] for r in rows] == ["sin", "square", "log"]
    assert list(rows[0]) == list(SCHEMAS["dnn_table"])


def test_fit_and_derive(tmp_path):
    assert run(tmp_path, "fit", "--fn", "sin", "--n", "101", "--n-sweep", "5") == 0
    assert read_csv(tmp_path / "fit_sin_sweep.csv", "sweep")[0]["k"] == pytest.approx(0.01)
    data = tmp_path / "pts.csv"
    x = np.linspace(0, 1, 60)
    data.write_text("x,phi\n" + "".join(f"{float(a)!r},{float(np.exp(a))!r}\n" for a in x))
    assert run(tmp_path, "derive", "--data", str(data), "--scheme", "implicit",
               "--n-test", "40", "--n-sweep", "5") == 0
    rows = read_csv(tmp_path / "derive_pts_implicit.csv", "derivatives_1d")
    g = np.array([r["grad"] for r in rows])
    xs = np.array([r["x"] for r in rows])
    assert np.max(np.abs(g - np.exp(xs))) < 1e-3


def test_bad_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("n: 50\nbogus_key: 1\n")
    assert run(tmp_path, "fit", "--config", str(cfg)) == 2
    err = capsys.readouterr().err
    assert "bogus_key" in err and len(err.strip().splitlines()) == 1
    assert run(tmp_path, "converge", "--ns", "300,100") == 2


def test_numerical_failure_exit_3(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise FitFailed("every swept kernel width failed")

    monkeypatch.setattr(cli, "fit_theta", boom)
    assert run(tmp_path, "fit", "--fn", "sin", "--n", "50") == 3
    assert capsys.readouterr().err.strip() == "kbr: FitFailed: every swept kernel width failed"


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("KBR_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(["pde", "burgers", "--n", "51", "--t-end", "0.05"]) == 0
    assert (tmp_path / "env" / "burgers_kbr-maccormack_snapshots.csv").exists()

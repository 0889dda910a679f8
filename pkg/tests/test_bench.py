"""Benchmark harness, ISE scoring, dataset fitting and the CLI."""

import csv
import os

import numpy as np
import pytest

from probitcopula import (
    BenchmarkConfig,
    DensityGrid,
    fit_dataset,
    ise_grid,
    run_benchmark,
    truth_grid,
)
from probitcopula.bench import REPORT_COLUMNS, read_data_csv, write_report_csv
from probitcopula.cli import load_config, main
from probitcopula.copulas import CopulaModel, sample_copula


def _write_sample_csv(path, model, n, seed, header=True):
    u, v = sample_copula(model, n, seed)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow(["x", "y"])
        for a, b in zip(u, v):
            writer.writerow([f"{a:.12g}", f"{b:.12g}"])
    return path


# ---------------------------------------------------------------------------
# ISE on the lattice

def test_ise_identical_grids_is_zero():
    g = DensityGrid(np.random.default_rng(0).uniform(0, 2, size=(64, 64)))
    assert ise_grid(g, g) == 0.0


def test_ise_unit_offset_arithmetic():
    ones = DensityGrid(np.ones((64, 64)))
    zeros = DensityGrid(np.zeros((64, 64)))
    # 64^2 unit squared errors with weight 1/65^2
    assert ise_grid(ones, zeros) == pytest.approx(4096.0 / 4225.0, abs=1e-14)
    assert ise_grid(ones, zeros) == pytest.approx(0.9694674556213018, abs=1e-14)


def test_ise_matches_double_loop():
    rng = np.random.default_rng(95)
    a = DensityGrid(rng.uniform(0, 3, size=(16, 16)))
    b = DensityGrid(rng.uniform(0, 3, size=(16, 16)))
    total = 0.0
    for i in range(16):
        for j in range(16):
            total += (a.values[i, j] - b.values[i, j]) ** 2
    total /= 17.0 * 17.0
    assert ise_grid(a, b) == pytest.approx(total, abs=1e-14)


def test_ise_rejects_mismatched_lattices():
    with pytest.raises(ValueError):
        ise_grid(DensityGrid(np.ones((8, 8))), DensityGrid(np.ones((16, 16))))


# ---------------------------------------------------------------------------
# benchmark harness

def test_benchmark_config_validation():
    good = dict(copulas=("independence",), estimators=("mirror",), n=50, reps=2)
    BenchmarkConfig(**good)
    with pytest.raises(ValueError):
        BenchmarkConfig(**{**good, "copulas": ()})
    with pytest.raises(ValueError):
        BenchmarkConfig(**{**good, "n": 10})
    with pytest.raises(ValueError):
        BenchmarkConfig(**{**good, "reps": 0})
    with pytest.raises(ValueError):
        BenchmarkConfig(**{**good, "grid_n": 1})


def test_benchmark_oracle_estimator_has_zero_ise():
    config = BenchmarkConfig(
        copulas=("gaussian:rho=0.5",), estimators=("oracle",), n=50, reps=1,
        grid_n=16, seed=5,
    )
    report = run_benchmark(config)
    assert report.row("gaussian:rho=0.5", "oracle")["mise"] == 0.0


def test_benchmark_relative_mise_of_mirror_is_exactly_one():
    config = BenchmarkConfig(
        copulas=("independence",), estimators=("mirror", "bernstein:k=10"),
        n=60, reps=3, grid_n=16, seed=6,
    )
    report = run_benchmark(config)
    row = report.row("independence", "mirror")
    assert row["relative_to_mirror"] == 1.0
    other = report.row("independence", "bernstein:k=10")
    assert other["relative_to_mirror"] == pytest.approx(
        other["mise"] / row["mise"], rel=1e-12
    )


def test_benchmark_reruns_are_bit_identical():
    config = BenchmarkConfig(
        copulas=("clayton:theta=2.5",), estimators=("mirror", "beta:h=0.05"),
        n=80, reps=4, grid_n=16, seed=7,
    )
    a = run_benchmark(config)
    b = run_benchmark(config)
    assert a.rows == b.rows
    for key in a.ise_samples:
        assert np.array_equal(a.ise_samples[key], b.ise_samples[key])


def test_benchmark_counts_failures_per_cell():
    # beta with h >= 0.25 fails at fit time on every replication
    config = BenchmarkConfig(
        copulas=("independence",), estimators=("mirror", "beta:h=0.3"),
        n=40, reps=3, grid_n=8, seed=8,
    )
    report = run_benchmark(config)
    bad = report.row("independence", "beta:h=0.3")
    assert bad["failures"] == 3
    assert np.isnan(bad["mise"])
    good = report.row("independence", "mirror")
    assert good["failures"] == 0 and np.isfinite(good["mise"])


def test_benchmark_ise_samples_expose_replication_detail():
    config = BenchmarkConfig(
        copulas=("independence",), estimators=("mirror",), n=50, reps=5,
        grid_n=8, seed=9,
    )
    report = run_benchmark(config)
    samples = report.ise_samples[("independence", "mirror")]
    assert samples.shape == (5,)
    assert report.row("independence", "mirror")["mise"] == pytest.approx(
        samples.mean()
    )


def test_report_csv_column_order(tmp_path):
    config = BenchmarkConfig(
        copulas=("independence",), estimators=("mirror",), n=40, reps=2,
        grid_n=8, seed=10,
    )
    report = run_benchmark(config)
    path = tmp_path / "report.csv"
    write_report_csv(report, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(REPORT_COLUMNS)
    assert rows[1][0] == "independence"
    assert rows[1][1] == "mirror"
    assert float(rows[1][6]) == 1.0


# ---------------------------------------------------------------------------
# dataset reading and fitting

def test_read_data_csv_with_and_without_header(tmp_path):
    p1 = _write_sample_csv(tmp_path / "h.csv", CopulaModel("independence"), 25, 1)
    x, y = read_data_csv(p1)
    assert x.shape == (25,) and y.shape == (25,)
    p2 = _write_sample_csv(
        tmp_path / "nh.csv", CopulaModel("independence"), 25, 1, header=False
    )
    x2, y2 = read_data_csv(p2)
    assert np.array_equal(x, x2) and np.array_equal(y, y2)


def test_read_data_csv_error_names_the_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n0.1,0.2\na,b\n")
    with pytest.raises(ValueError, match="row 3"):
        read_data_csv(path)
    path.write_text("x,y\n0.1,0.2,0.3\n")
    with pytest.raises(ValueError, match="row 2"):
        read_data_csv(path)
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_data_csv(path)


def test_fit_dataset_requires_minimum_sample(tmp_path):
    path = _write_sample_csv(tmp_path / "tiny.csv", CopulaModel("independence"), 10, 2)
    with pytest.raises(ValueError, match="at least 20"):
        fit_dataset(path, "mirror")


def test_fit_dataset_independence_grid_is_flat(tmp_path):
    path = _write_sample_csv(tmp_path / "ind.csv", CopulaModel("independence"), 400, 3)
    grid, manifest = fit_dataset(path, "amended", grid_n=32)
    assert grid.n_grid == 32
    assert float(grid.values.mean()) == pytest.approx(1.0, abs=0.05)
    assert manifest["n"] == 400
    assert manifest["estimator"] == "amended"
    assert "param_h1_sq" in manifest


def test_fit_dataset_writes_grid_and_manifest(tmp_path):
    path = _write_sample_csv(tmp_path / "d.csv", CopulaModel("gaussian", 0.5), 120, 4)
    prefix = tmp_path / "out"
    grid, manifest = fit_dataset(path, "bernstein:k=10", grid_n=16, out_prefix=prefix)
    assert os.path.exists(f"{prefix}.csv")
    assert os.path.exists(f"{prefix}.manifest.txt")
    text = open(f"{prefix}.manifest.txt").read()
    assert "param_k = 10" in text
    from probitcopula import read_grid_csv

    back = read_grid_csv(f"{prefix}.csv")
    assert np.allclose(back.values, grid.values, atol=1e-12)


def test_fit_dataset_knn_selection_is_plausible(tmp_path):
    # heavier corner dependence, moderate sample: the selected fraction
    # should sit well inside the grid, not at its edges
    path = _write_sample_csv(
        tmp_path / "gumbel.csv", CopulaModel("gumbel", 1.453), 1466, 2
    )
    grid, manifest = fit_dataset(path, "logquad", grid_n=8)
    assert 0.3 <= manifest["param_alpha_q"] <= 0.7, manifest
    assert manifest["param_kappa"] == pytest.approx(
        manifest["param_alpha_q"] / manifest["param_alpha_r"]
    )
    assert np.all(grid.values >= 0.0)


# ---------------------------------------------------------------------------
# command line interface

def test_cli_simulate_writes_deterministic_csv(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    rc = main(["simulate", "--model", "gaussian:rho=0.59", "--n", "30",
               "--seed", "11", "--out", str(out)])
    assert rc == 0
    x, y = read_data_csv(out)
    u, v = sample_copula(CopulaModel("gaussian", 0.59), 30, seed=11)
    assert np.allclose(x, u, atol=1e-11) and np.allclose(y, v, atol=1e-11)


def test_cli_fit_and_ise_roundtrip(tmp_path, capsys):
    data = _write_sample_csv(tmp_path / "d.csv", CopulaModel("frank", 4.16), 200, 12)
    prefix = tmp_path / "fit"
    rc = main(["fit", "--data", str(data), "--estimator", "bernstein:k=10",
               "--grid-n", "16", "--out", str(prefix)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "param_k = 10" in out
    # score the saved surface against the saved truth
    from probitcopula import write_grid_csv

    truth_path = tmp_path / "truth.csv"
    write_grid_csv(truth_grid(CopulaModel("frank", 4.16), 16), truth_path)
    rc = main(["ise", "--estimate", f"{prefix}.csv", "--truth", str(truth_path)])
    assert rc == 0
    value = float(capsys.readouterr().out.strip())
    assert 0.0 < value < 5.0


def test_cli_bench_with_config_and_override(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text(
        "# smoke benchmark\n"
        "copulas = independence\n"
        "estimators = mirror; bernstein:k=8\n"
        "n = 40\n"
        "reps = 3\n"
        "grid_n = 8\n"
        "seed = 13\n"
    )
    outdir = tmp_path / "results"
    rc = main(["bench", "--config", str(cfg), "--reps", "2",
               "--outdir", str(outdir), "--quiet"])
    assert rc == 0
    report_path = outdir / "report.csv"
    assert report_path.exists()
    with open(report_path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(REPORT_COLUMNS)
    # the flag overrode the config's replication count
    assert rows[1][3] == "2"
    assert {r[1] for r in rows[1:]} == {"mirror", "bernstein:k=8"}


def test_cli_bench_outdir_from_environment(tmp_path, capsys, monkeypatch):
    outdir = tmp_path / "envout"
    monkeypatch.setenv("PROBITCOPULA_OUTDIR", str(outdir))
    rc = main(["bench", "--copulas", "independence", "--estimators", "mirror",
               "--n", "40", "--reps", "2", "--grid-n", "8", "--quiet"])
    assert rc == 0
    assert (outdir / "report.csv").exists()


def test_cli_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("copulas = independence\nbogus = 1\n")
    with pytest.raises(ValueError, match="line 2.*bogus"):
        load_config(cfg)
    cfg.write_text("copulas independence\n")
    with pytest.raises(ValueError, match="line 1"):
        load_config(cfg)


def test_cli_bench_requires_specs():
    with pytest.raises(SystemExit):
        main(["bench", "--n", "40", "--quiet"])

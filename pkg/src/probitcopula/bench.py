"""Monte Carlo benchmark harness and dataset fitting.

A benchmark run draws, per copula model and replication, a fresh sample
from an independent counter-derived random stream, fits every requested
estimator on the pseudo-observations of that same sample, and scores each
fit by the integrated squared error on the interior evaluation lattice.
Reports aggregate to MISE with a standard error, failure counts and the
ratio to the mirror estimator, the conventional baseline.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .copulas import parse_copula_spec, sample_copula
from .estimators import make_estimator, truth_grid
from .kde import DensityGrid, write_grid_csv
from .transforms import pseudo_observations

__all__ = [
    "ise_grid",
    "BenchmarkConfig",
    "BenchmarkReport",
    "run_benchmark",
    "fit_dataset",
    "read_data_csv",
    "write_report_csv",
]

REPORT_COLUMNS = (
    "copula", "estimator", "n", "M", "mise", "stderr", "relative_to_mirror", "failures",
)


def ise_grid(estimate: DensityGrid, truth: DensityGrid) -> float:
    """Integrated squared error on the lattice: sum (e-t)^2 / (N+1)^2."""
    if estimate.n_grid != truth.n_grid:
        raise ValueError("estimate and truth grids must share the lattice")
    diff = estimate.values - truth.values
    n = estimate.n_grid
    return float((diff * diff).sum() / ((n + 1) * (n + 1)))


@dataclass(frozen=True)
class BenchmarkConfig:
    copulas: tuple[str, ...]
    estimators: tuple[str, ...]
    n: int
    reps: int
    grid_n: int = 64
    seed: int = 20240801

    def __post_init__(self):
        if not self.copulas:
            raise ValueError("benchmark needs at least one copula model")
        if not self.estimators:
            raise ValueError("benchmark needs at least one estimator")
        if self.n < 20:
            raise ValueError("benchmark sample size must be at least 20")
        if self.reps < 1:
            raise ValueError("benchmark needs at least one replication")
        if self.grid_n < 2:
            raise ValueError("evaluation lattice must have at least 2 points per axis")
        object.__setattr__(self, "copulas", tuple(self.copulas))
        object.__setattr__(self, "estimators", tuple(self.estimators))


@dataclass
class BenchmarkReport:
    config: BenchmarkConfig
    rows: list[dict] = field(default_factory=list)
    ise_samples: dict = field(default_factory=dict)

    def row(self, copula: str, estimator: str) -> dict:
        for r in self.rows:
            if r["copula"] == copula and r["estimator"] == estimator:
                return r
        raise KeyError((copula, estimator))


def _replication_rng(seed: int, copula_index: int, rep: int) -> np.random.Generator:
    """Independent stream addressed by (copula, replication) counters."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(copula_index, rep))
    )


def run_benchmark(config: BenchmarkConfig, progress=None) -> BenchmarkReport:
    """Run the full replication grid; deterministic in the config."""
    report = BenchmarkReport(config=config)
    for ci, cspec in enumerate(config.copulas):
        model = parse_copula_spec(cspec)
        truth = truth_grid(model, config.grid_n)
        ises: dict[str, list[float]] = {e: [] for e in config.estimators}
        failures: dict[str, int] = {e: 0 for e in config.estimators}
        for rep in range(config.reps):
            rng = _replication_rng(config.seed, ci, rep)
            x, y = sample_copula(model, config.n, rng)
            ps = pseudo_observations(x, y)
            for espec in config.estimators:
                try:
                    est = make_estimator(espec, model=model)
                    grid = est.fit(ps).grid(config.grid_n)
                    ises[espec].append(ise_grid(grid, truth))
                except Exception:
                    failures[espec] += 1
            if progress is not None:
                progress(cspec, rep)
        mirror_mise = None
        if "mirror" in config.estimators and ises["mirror"]:
            mirror_mise = float(np.mean(ises["mirror"]))
        for espec in config.estimators:
            vals = np.asarray(ises[espec])
            mise = float(vals.mean()) if vals.size else float("nan")
            stderr = (
                float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
            )
            if mirror_mise:
                rel = 1.0 if espec == "mirror" else mise / mirror_mise
            else:
                rel = float("nan")
            report.rows.append({
                "copula": cspec,
                "estimator": espec,
                "n": config.n,
                "M": config.reps,
                "mise": mise,
                "stderr": stderr,
                "relative_to_mirror": rel,
                "failures": failures[espec],
            })
            report.ise_samples[(cspec, espec)] = vals
    return report


def write_report_csv(report: BenchmarkReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in report.rows:
            writer.writerow([
                row["copula"], row["estimator"], row["n"], row["M"],
                f"{row['mise']:.8g}", f"{row['stderr']:.8g}",
                f"{row['relative_to_mirror']:.8g}", row["failures"],
            ])


def read_data_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column numeric CSV with optional header; errors name the row."""
    xs, ys = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [(i, row) for i, row in enumerate(reader, start=1) if row and any(c.strip() for c in row)]
    if not rows:
        raise ValueError("data file is empty")
    start = 0
    first = rows[0][1]
    try:
        [float(c) for c in first[:2]]
    except ValueError:
        start = 1  # header line
    for lineno, row in rows[start:]:
        if len(row) != 2:
            raise ValueError(f"row {lineno}: expected 2 columns, found {len(row)}")
        try:
            xs.append(float(row[0]))
            ys.append(float(row[1]))
        except ValueError:
            raise ValueError(f"row {lineno}: non-numeric value") from None
    if not xs:
        raise ValueError("data file contains no data rows")
    return np.asarray(xs), np.asarray(ys)


def fit_dataset(path, estimator_spec: str, grid_n: int = 64, out_prefix=None):
    """Fit one estimator to a dataset file and evaluate it on the lattice.

    Returns (DensityGrid, manifest dict); with ``out_prefix`` the grid and a
    flat key=value manifest are also written to disk.
    """
    x, y = read_data_csv(path)
    if x.size < 20:
        raise ValueError(f"need at least 20 observations, found {x.size}")
    ps = pseudo_observations(x, y)
    est = make_estimator(estimator_spec)
    t0 = time.perf_counter()
    est.fit(ps)
    grid = est.grid(grid_n)
    elapsed = time.perf_counter() - t0
    manifest = {
        "data": str(path),
        "estimator": est.spec,
        "n": ps.n,
        "grid_n": grid_n,
        "elapsed_seconds": round(elapsed, 3),
    }
    for key, value in est.manifest().items():
        manifest[f"param_{key}"] = value
    if out_prefix is not None:
        grid_path = f"{out_prefix}.csv"
        manifest_path = f"{out_prefix}.manifest.txt"
        write_grid_csv(grid, grid_path)
        with open(manifest_path, "w") as fh:
            for key, value in manifest.items():
                fh.write(f"{key} = {value}\n")
        manifest["grid_path"] = grid_path
        manifest["manifest_path"] = manifest_path
    return grid, manifest


def default_output_dir() -> str:
    return os.environ.get("PROBITCOPULA_OUTDIR", ".")

"""Copula density estimation through probit-transformation kernels.

The estimators smooth the probit-transformed pseudo-observations on the
plane, where there is no boundary, and map the fit back to the unit square.
Alongside the plain back-transformed KDE the package carries its amended
variant, local log-linear and log-quadratic likelihood estimators with
cross-validated fixed or k-nearest-neighbour bandwidths, the classical
mirror / Beta-kernel / Bernstein competitors, parametric copula models for
simulation, and a Monte Carlo benchmark harness.
"""

from .transforms import (
    PseudoSample,
    TransformedSample,
    pseudo_observations,
    probit,
    transform,
    empirical_copula,
)
from .copulas import CopulaModel, copula_density, sample_copula, tau_to_param, parse_copula_spec
from .kde import (
    BandwidthMatrix,
    DensityGrid,
    gaussian_kde2,
    naive_estimate,
    amended_estimate,
    normal_reference_H,
    renormalize,
    unit_square_kde,
    write_grid_csv,
    read_grid_csv,
)
from .loclik import (
    LocalFit,
    KnnBandwidth,
    LoclikError,
    loclik_objective,
    loclik_fit_point,
    knn_distance,
    improved_estimate,
)
from .bandwidth import (
    PcaDecomposition,
    SmoothingSelection,
    pca_scores,
    cv_criterion_1d,
    select_fixed,
    select_knn,
)
from .competitors import mirror_estimate, beta_estimate, bernstein_estimate
from .estimators import make_estimator, truth_grid
from .bench import BenchmarkConfig, BenchmarkReport, run_benchmark, fit_dataset, ise_grid

__version__ = "0.1.0"

__all__ = [
    "PseudoSample", "TransformedSample", "pseudo_observations", "probit",
    "transform", "empirical_copula",
    "CopulaModel", "copula_density", "sample_copula", "tau_to_param",
    "parse_copula_spec",
    "BandwidthMatrix", "DensityGrid", "gaussian_kde2", "naive_estimate",
    "amended_estimate", "normal_reference_H", "renormalize", "unit_square_kde",
    "write_grid_csv", "read_grid_csv",
    "LocalFit", "KnnBandwidth", "LoclikError", "loclik_objective",
    "loclik_fit_point", "knn_distance", "improved_estimate",
    "PcaDecomposition", "SmoothingSelection", "pca_scores", "cv_criterion_1d",
    "select_fixed", "select_knn",
    "mirror_estimate", "beta_estimate", "bernstein_estimate",
    "make_estimator", "truth_grid",
    "BenchmarkConfig", "BenchmarkReport", "run_benchmark", "fit_dataset",
    "ise_grid",
]

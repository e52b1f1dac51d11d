"""Learned filters and weights for filtered back-projection tomography.

The package is organized around a small pipeline:

* :mod:`lfbp.geometry`  -- scan trajectories and per-view rays
* :mod:`lfbp.projector` -- forward operator A and its exact adjoint
* :mod:`lfbp.phantom`   -- synthetic objects, noise, datasets
* :mod:`lfbp.filters`   -- the structured operator family B(p)
* :mod:`lfbp.training`  -- adjoint gradients and Adam training of p
* :mod:`lfbp.oracle`    -- dense closed-form theory on small instances
* :mod:`lfbp.metrics`   -- MSE/SSIM and classical baselines
* :mod:`lfbp.cli`       -- reproducible experiment driver
"""

from .errors import NumericalError
from .filters import (ClassicalFilterKind, FilterParams, apply_B, classical_filter,
                      classical_params, fbp_normalization, gauge_normalize,
                      identity_params, reconstruct, standard_weights)
from .geometry import Geometry, GeometryKind, RayBundle, make_geometry, rays_for_angle
from .metrics import MetricReport, classical_reconstruct, evaluate, mse, nag_least_squares, ssim
from .oracle import (DenseOperator, ErrorDecomposition, MomentModel, SpectralFactors,
                     StabilityTable, empirical_moments, error_decomposition,
                     fit_dense_operator, gaussian_w2, materialize, materialize_filter,
                     solve_optimal_B, solve_optimal_B_model, spectral_factors,
                     stability_probe)
from .phantom import Dataset, PhantomSpec, add_gaussian_noise, derive_seed, generate_phantom, make_dataset
from .projector import back_project, forward_project
from .training import TrainConfig, TrainReport, loss_and_grad, smoothness_penalty, train

__version__ = "0.1.0"

__all__ = [
    "ClassicalFilterKind", "Dataset", "DenseOperator", "ErrorDecomposition",
    "FilterParams", "Geometry", "GeometryKind", "MetricReport", "MomentModel",
    "NumericalError", "PhantomSpec", "RayBundle", "SpectralFactors",
    "StabilityTable", "TrainConfig", "TrainReport", "add_gaussian_noise",
    "apply_B", "back_project", "classical_filter", "classical_params",
    "classical_reconstruct", "derive_seed", "empirical_moments",
    "error_decomposition", "evaluate", "fbp_normalization", "fit_dense_operator",
    "forward_project", "gauge_normalize", "gaussian_w2", "generate_phantom",
    "identity_params", "loss_and_grad", "make_dataset", "make_geometry",
    "materialize", "materialize_filter", "mse", "nag_least_squares",
    "rays_for_angle", "reconstruct", "smoothness_penalty", "solve_optimal_B",
    "solve_optimal_B_model", "spectral_factors", "ssim", "stability_probe",
    "train",
]

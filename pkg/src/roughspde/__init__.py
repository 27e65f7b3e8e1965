"""Solvers and Monte Carlo tooling for stochastic heat/wave equations on (0,1)
driven by noise white in time and fractional in space (Hurst index H <= 1/2).

Layout: `grid` (space-time grids, ladders), `basis` (Dirichlet eigenpairs,
kernels, regularity sums), `noise` (exact increment sampling, Ito isometry),
`wz` (piecewise-constant regularization), `heat`/`wave` (spectral + FEM
solvers), `harness` (coupled convergence studies, check suites, reports),
`cli` (console entry point `roughspde`). Hot solver kernels run on a compiled
extension when available (`kernels.BACKEND`), with a NumPy fallback.
"""

from . import kernels
from .basis import HEAT, WAVE
from .grid import Grid, GridLadder, SobolevIndex, make_grid, make_ladder
from .harness import (
    ConvergenceReport,
    ExperimentConfig,
    default_config,
    fit_rate,
    run_fem_convergence,
    run_h1_scaling,
    run_lemma_checks,
    run_noise_checks,
    run_norm_scaling,
    run_spectral_convergence,
    run_wz_convergence,
)
from .heat import FemHeatState, SpectralHeatState, l2_error, solve_she_fem, solve_she_spectral
from .noise import (
    CellIncrements,
    NoiseModel,
    SpatialIncrementCovariance,
    StepFunction2D,
    aggregate,
    increment_covariance_form,
    ito_isometry_variance,
    sample_cell_increments,
    sampler_isometry_check,
    spatial_covariance,
)
from .problem import DriftSpec, InitialData
from .wave import WaveState, solve_swe_spectral
from .wz import RegularizedNoise, l2_norm_sq_closed_form, regularize

__version__ = "0.1.0"

kernel_backend = kernels.BACKEND

__all__ = [
    "HEAT",
    "WAVE",
    "Grid",
    "GridLadder",
    "SobolevIndex",
    "make_grid",
    "make_ladder",
    "NoiseModel",
    "SpatialIncrementCovariance",
    "CellIncrements",
    "StepFunction2D",
    "spatial_covariance",
    "sample_cell_increments",
    "aggregate",
    "ito_isometry_variance",
    "increment_covariance_form",
    "sampler_isometry_check",
    "RegularizedNoise",
    "regularize",
    "l2_norm_sq_closed_form",
    "DriftSpec",
    "InitialData",
    "SpectralHeatState",
    "FemHeatState",
    "solve_she_spectral",
    "solve_she_fem",
    "l2_error",
    "WaveState",
    "solve_swe_spectral",
    "ExperimentConfig",
    "ConvergenceReport",
    "default_config",
    "fit_rate",
    "run_wz_convergence",
    "run_fem_convergence",
    "run_spectral_convergence",
    "run_h1_scaling",
    "run_noise_checks",
    "run_lemma_checks",
    "run_norm_scaling",
    "kernel_backend",
    "__version__",
]

"""Regime-switching VARX estimation with simultaneous missing-value reconstruction.

The estimator blends K local VARX models with a persistency-bounded
switching process and treats the missing entries of both the target series
and its covariates as optimization variables of the same objective,
alternating over four exact block minimizations: a linear program in the
switching weights, banded quadratic programs in the missing values of each
series, and weighted least squares per local model.
"""

from .benchmark import (baseline_interpolate, best_label_permutation, desk_config,
                        gamma_misfits, paper_config, reconstruction_mse, run_case,
                        simulation_mse, theta_mse)
from .core import (FemmConfig, FemmError, FemmNumericsWarning, LocalModel,
                   ModelSet, SwitchingWeights, TimeSeriesWithMask, embed_x,
                   model_distance, objective, simulate)
from .driver import FitResult, alternate, fit, initialize, interpolate_missing
from .gamma_step import distance_matrix, solve_gamma
from .qp_u import assemble_block_u, assemble_qp_u
from .qp_x import (AssembledQP, ReductionMaps, assemble_block_x, assemble_qp_x,
                   reduce_qp, solve_missing)
from .synthetic import (GeneratorSpec, default_regime_path, inject_mcar,
                        load_two_regime_models, make_covariates, make_dataset,
                        make_series)
from .theta_step import build_design, project_l1_ball, solve_theta

__version__ = "0.1.0"

__all__ = [
    "AssembledQP", "FemmConfig", "FemmError", "FemmNumericsWarning",
    "FitResult", "GeneratorSpec", "LocalModel", "ModelSet", "ReductionMaps",
    "SwitchingWeights", "TimeSeriesWithMask",
    "alternate", "assemble_block_u", "assemble_block_x", "assemble_qp_u",
    "assemble_qp_x", "baseline_interpolate", "best_label_permutation",
    "build_design", "default_regime_path", "desk_config", "distance_matrix",
    "embed_x", "fit", "gamma_misfits", "initialize", "inject_mcar",
    "interpolate_missing", "load_two_regime_models", "make_covariates",
    "make_dataset", "make_series", "model_distance", "objective",
    "paper_config", "project_l1_ball", "reconstruction_mse", "reduce_qp",
    "run_case", "simulate", "simulation_mse", "solve_gamma", "solve_missing",
    "solve_theta", "theta_mse",
]

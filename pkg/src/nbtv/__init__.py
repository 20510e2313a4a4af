"""Reconstruction of nonnegative piecewise-constant images from blurred,
negative-binomial distributed count measurements, via a Barzilai-Borwein
outer loop with reweighted lp total-variation proximal subproblems."""

from .blur import BlurSpec, blur_adjoint, blur_apply, blur_dense_matrix
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateInputError,
    DegenerateStepError,
    DomainError,
    NbtvError,
    ParseError,
    ShapeError,
)
from .experiments import ExperimentConfig, run_experiment1, run_experiment2
from .image import (
    as_counts,
    as_image,
    as_signal,
    read_image_csv,
    read_image_pgm,
    rmse,
    write_image_csv,
    write_image_pgm,
)
from .likelihoods import (
    DataFit,
    nb_gradient,
    nb_hessian_dense,
    nb_objective,
    poisson_gradient,
    poisson_objective,
)
from .noise import NoiseModel, make_rng, sample_counts
from .phantom import make_phantom
from .regularizers import (
    ANISO_TV,
    ISO_TV,
    LP_NORM,
    Penalty,
    ProxConfig,
    WeightFields,
    compute_pixel_weights,
    compute_weights,
    fgp_weighted_tv,
    lp_norm_value,
    prox_weighted_lp,
    prox_weighted_tv,
    tv_value,
    weighted_tv_value,
)
from .solver import IterationTrace, SolverConfig, bb_step, reconstruct

__version__ = "0.1.0"

__all__ = [
    "ANISO_TV",
    "BlurSpec",
    "CapacityError",
    "ConfigError",
    "DataFit",
    "DegenerateInputError",
    "DegenerateStepError",
    "DomainError",
    "ExperimentConfig",
    "ISO_TV",
    "IterationTrace",
    "LP_NORM",
    "NbtvError",
    "NoiseModel",
    "ParseError",
    "Penalty",
    "ProxConfig",
    "ShapeError",
    "SolverConfig",
    "WeightFields",
    "as_counts",
    "as_image",
    "as_signal",
    "bb_step",
    "blur_adjoint",
    "blur_apply",
    "blur_dense_matrix",
    "compute_pixel_weights",
    "compute_weights",
    "fgp_weighted_tv",
    "lp_norm_value",
    "make_phantom",
    "make_rng",
    "nb_gradient",
    "nb_hessian_dense",
    "nb_objective",
    "poisson_gradient",
    "poisson_objective",
    "prox_weighted_lp",
    "prox_weighted_tv",
    "read_image_csv",
    "read_image_pgm",
    "reconstruct",
    "rmse",
    "run_experiment1",
    "run_experiment2",
    "sample_counts",
    "tv_value",
    "weighted_tv_value",
    "write_image_csv",
    "write_image_pgm",
]

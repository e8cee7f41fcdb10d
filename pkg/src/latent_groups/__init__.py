"""Bayesian detection of latent two-group structure among the levels of a categorical predictor."""

from .analysis import analyze, candidate_models, common_fraction, log_fractional_marginal
from .data import (
    DOG_LYMPHOMA,
    Dataset,
    TwoWayLayout,
    builtin_dataset,
    load_ancova_csv,
    load_twoway_csv,
    load_twoway_long_csv,
    transpose_layout,
    write_ancova_csv,
    write_twoway_csv,
)
from .design import ModelSpec, build_model_matrix, sufficient_stats
from .errors import LatentGroupsError
from .posterior import PosteriorTable, bayes_factor
from .schemes import GroupingScheme, enumerate_schemes, scheme_count
from .simulate import ModelParams, StudyConfig, preset_study, run_study, simulate_ancova, simulate_twoway

__version__ = "0.1.0"

__all__ = [
    "DOG_LYMPHOMA",
    "Dataset",
    "GroupingScheme",
    "LatentGroupsError",
    "ModelParams",
    "ModelSpec",
    "PosteriorTable",
    "StudyConfig",
    "TwoWayLayout",
    "analyze",
    "bayes_factor",
    "build_model_matrix",
    "builtin_dataset",
    "candidate_models",
    "common_fraction",
    "enumerate_schemes",
    "load_ancova_csv",
    "load_twoway_csv",
    "load_twoway_long_csv",
    "log_fractional_marginal",
    "preset_study",
    "run_study",
    "scheme_count",
    "simulate_ancova",
    "simulate_twoway",
    "sufficient_stats",
    "transpose_layout",
    "write_ancova_csv",
    "write_twoway_csv",
]

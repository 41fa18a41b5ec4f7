"""Sparse identification of hysteresis-controlled dynamical systems.

Discovers discrete-time models x(k+1) = Theta(x(k)) Xi by sequentially
thresholded least squares over a polynomial basis library augmented with
hysteron (relay / proximity) features, so systems governed by two-point
switching controllers can be identified from measured trajectories alone.
"""
from .dataset import (
    ChannelScaling,
    LagSpec,
    TimeSeriesDataset,
    add_noise,
    apply_scaling,
    build_regression_pair,
    downsample,
    fit_scaling,
    read_csv,
    scale_affine,
    split_scenarios,
    unscale,
    write_csv,
)
from .errors import (
    AllTermsEliminated,
    ConfigError,
    DivergenceDetected,
    HysidError,
    InfeasibleVariation,
    NoSwitchObserved,
    NonFiniteValue,
    PipelineError,
    RankDeficient,
)
from .hysteron import (
    HysteronSpec,
    HysteronTrace,
    default_epsilon,
    eval_hysteron,
    eval_proximity,
    eval_relay,
)
from .library import BasisDescriptor, BasisLibrary, count_columns, enumerate_basis
from .model import (
    SparseModel,
    free_run,
    load_model,
    predict_one_step,
    render_equations,
    save_model,
)
from .pipeline import IdentifyConfig, identify, predict_free_run
from .regression import StlsqConfig, least_squares, stlsq
from .tanksim import TankScenario, make_scenario_batch, simulate

__version__ = "1.0.0"

__all__ = [
    "AllTermsEliminated",
    "BasisDescriptor",
    "BasisLibrary",
    "ChannelScaling",
    "ConfigError",
    "DivergenceDetected",
    "HysidError",
    "HysteronSpec",
    "HysteronTrace",
    "IdentifyConfig",
    "InfeasibleVariation",
    "LagSpec",
    "NoSwitchObserved",
    "NonFiniteValue",
    "PipelineError",
    "RankDeficient",
    "SparseModel",
    "StlsqConfig",
    "TankScenario",
    "TimeSeriesDataset",
    "add_noise",
    "apply_scaling",
    "build_regression_pair",
    "count_columns",
    "default_epsilon",
    "downsample",
    "enumerate_basis",
    "eval_hysteron",
    "eval_proximity",
    "eval_relay",
    "fit_scaling",
    "free_run",
    "identify",
    "least_squares",
    "load_model",
    "make_scenario_batch",
    "predict_free_run",
    "predict_one_step",
    "read_csv",
    "render_equations",
    "save_model",
    "scale_affine",
    "simulate",
    "split_scenarios",
    "stlsq",
    "unscale",
    "write_csv",
]

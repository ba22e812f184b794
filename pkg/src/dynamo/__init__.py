"""Kernel-localized learning of time-varying causal graphs."""

__version__ = "0.1.0"

from .acyclicity import h_gradient, h_value, matrix_exp
from .bandwidth import CVConfig, select_bandwidth
from .data import LaggedView, TimeSeriesMatrix, build_lagged, home_away_difference, load_csv
from .kernel import KernelSpec, local_weights
from .linear import FitResult, LinearParams, SolverConfig, fit_at, fit_path, threshold
from .metrics import MetricsReport, f1, predict_mse, select_lag, shd
from .nonlinear import NonlinearFitResult, fit_at_nonlinear
from .simulate import GroundTruthProcess, generate, make_process

__all__ = [
    "CVConfig", "FitResult", "GroundTruthProcess", "KernelSpec", "LaggedView", "LinearParams",
    "MetricsReport", "NonlinearFitResult", "SolverConfig", "TimeSeriesMatrix",
    "build_lagged", "f1", "fit_at", "fit_at_nonlinear", "fit_path", "generate", "h_gradient",
    "h_value", "home_away_difference", "load_csv", "local_weights", "make_process", "matrix_exp",
    "predict_mse", "select_bandwidth", "select_lag", "shd", "threshold",
]

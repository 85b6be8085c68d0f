"""Sparse covariance estimation under a linear covariance model.

The estimator treats the sample covariance as a noisy observation of the
true covariance, weights the residual ``vech(S - Sigma)`` by its Gaussian
precision (built from a CLIME estimate of the inverse covariance), adds an
l1 penalty on the off-diagonal entries and constrains the result to be
positive definite. The diagonal is kept equal to the sample variances.
"""

__version__ = "0.1.0"

from .admm import SplcmConfig, SplcmFit, fit, pd_project, soft_threshold_estimate
from .clime import clime_precision, clime_solve, plugin_precision
from .downstream import bootstrap_error_cov, corr_from_cov, hier_cluster, qda_fit, qda_predict
from .estimator import SoftThresholdCovariance, SparseLCM, SparseQDA, sparse_lcm
from .exceptions import NonConvergenceWarning, NumericalError, SplcmError
from .simbench import CovModelSpec, evaluate, gen_cov, run_experiment, sample_gaussian
from .symvec import unvech, vech
from .tuning import TuneGrid, bic_score, grid_search
from .wishart import ErrorPrecision, build_error_cov, build_error_precision

__all__ = [
    "__version__",
    "SplcmConfig",
    "SplcmFit",
    "fit",
    "pd_project",
    "soft_threshold_estimate",
    "clime_precision",
    "clime_solve",
    "plugin_precision",
    "bootstrap_error_cov",
    "corr_from_cov",
    "hier_cluster",
    "qda_fit",
    "qda_predict",
    "SoftThresholdCovariance",
    "SparseLCM",
    "SparseQDA",
    "sparse_lcm",
    "NonConvergenceWarning",
    "NumericalError",
    "SplcmError",
    "CovModelSpec",
    "evaluate",
    "gen_cov",
    "run_experiment",
    "sample_gaussian",
    "unvech",
    "vech",
    "TuneGrid",
    "bic_score",
    "grid_search",
    "ErrorPrecision",
    "build_error_cov",
    "build_error_precision",
]

"""scikit-learn style estimators wrapping the functional core."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .admm import SplcmConfig, default_delta, fit as admm_fit
from .clime import plugin_precision
from .downstream import COVARIANCE_METHODS, qda_discriminants, qda_fit
from .exceptions import DimensionMismatch
from .tuning import TuneGrid, bic_score, grid_search, soft_grid_search
from .wishart import build_error_precision

__all__ = ["SparseLCM", "SoftThresholdCovariance", "SparseQDA", "empirical_covariance", "sparse_lcm"]


def empirical_covariance(x, assume_centered: bool = True):
    """``(S, location)`` with ``S = X'X / n`` after optional centering."""
    x = check_array(x, ensure_min_samples=1, ensure_min_features=2)
    if assume_centered:
        loc = np.zeros(x.shape[1])
    else:
        loc = x.mean(axis=0)
        x = x - loc
    s = x.T @ x / x.shape[0]
    return 0.5 * (s + s.T), loc


def _check_cov(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"covariance must be square, got shape {s.shape}")
    return 0.5 * (s + s.T)


def sparse_lcm(
    s,
    n: int,
    lam: float | None = None,
    rho: float | None = None,
    tau: float | None = None,
    precision="clime",
    cfg: SplcmConfig | None = None,
    threads: int = 1,
):
    """Fit the estimator to a sample covariance.

    ``lam`` or ``rho`` left as ``None`` are chosen by BIC. ``precision`` is
    ``"clime"``, ``"identity"`` or a ``p x p`` matrix used as is.

    Returns
    -------
    fit : SplcmFit
    info : dict
        ``lambda``, ``rho``, ``bic``, ``omega`` and, when a grid was searched,
        ``tuning`` (a :class:`~sparse_lcm.tuning.TuneResult`).
    """
    s = _check_cov(s)
    p = s.shape[0]
    base = SplcmConfig(lam=0.0) if cfg is None else cfg
    if isinstance(precision, str):
        if precision == "identity":
            omega = np.eye(p)
        elif precision == "clime":
            omega = None
        else:
            raise ValueError(f"precision must be 'clime', 'identity' or a matrix, got {precision!r}")
    else:
        omega = np.asarray(precision, dtype=float)
        if omega.shape != (p, p):
            raise DimensionMismatch(f"precision has shape {omega.shape}, expected {(p, p)}")

    direct = lam is not None and (omega is not None or rho is not None)
    if direct:
        if omega is None:
            omega = plugin_precision(s, rho, tau)
        ep = build_error_precision(omega, n)
        cfg = SplcmConfig(**{**base.__dict__, "lam": float(lam)})
        f = admm_fit(s, ep, cfg)
        info = {"lambda": float(lam), "rho": rho, "bic": bic_score(s, f, n), "omega": omega, "tuning": None}
        return f, info

    grid = TuneGrid(
        lambdas=None if lam is None else (float(lam),),
        rhos=None if rho is None else (float(rho),),
    )
    res = grid_search(s, n, grid=grid, cfg=base, tau=tau, precision=omega, threads=threads)
    rho_out = None if omega is not None else res.rho
    info = {"lambda": res.lam, "rho": rho_out, "bic": res.bic, "omega": res.omega, "tuning": res}
    return res.fit, info


class SparseLCM(BaseEstimator):
    """Sparse covariance estimate with the sample variances kept on the diagonal.

    Off-diagonal entries solve an l1-penalized generalized least squares
    problem on ``vech(S)`` whose weight is the Gaussian precision of
    ``vech(S)``, built from a CLIME estimate of the inverse covariance. The
    estimate is positive definite with smallest eigenvalue at least ``delta``.

    Parameters
    ----------
    lam : float or None
        Penalty; ``None`` selects it by BIC.
    rho : float or None
        CLIME constraint level; ``None`` selects it by BIC.
    tau : float or None
        CLIME hard threshold, defaults to ``rho``.
    precision : {"clime", "identity"} or array of shape (p, p)
        Source of the inverse covariance inside the weight. ``"identity"``
        reduces the estimator to soft thresholding; a matrix (e.g. the true
        precision in a simulation) is used as given.
    gamma, delta, eps_abs, eps_rel, max_iter, solver
        ADMM settings, see :class:`~sparse_lcm.admm.SplcmConfig`.
    assume_centered : bool
        If False the column means are removed before forming ``S``.
    threads : int
        Worker threads for the grid search.

    Attributes
    ----------
    covariance_ : ndarray of shape (p, p)
    location_ : ndarray of shape (p,)
    support_ : ndarray of bool, shape (p, p)
        Estimated off-diagonal nonzeros (exact zeros elsewhere).
    lambda_, rho_, bic_ : float
    omega_ : ndarray of shape (p, p)
        Inverse covariance used in the weight.
    n_iter_ : int
    converged_ : bool
    fit_ : SplcmFit
    tuning_ : TuneResult or None
    """

    def __init__(
        self,
        lam=None,
        rho=None,
        tau=None,
        precision="clime",
        gamma=None,
        delta=None,
        eps_abs=1e-6,
        eps_rel=1e-5,
        max_iter=1000,
        solver="auto",
        assume_centered=True,
        threads=1,
    ):
        self.lam = lam
        self.rho = rho
        self.tau = tau
        self.precision = precision
        self.gamma = gamma
        self.delta = delta
        self.eps_abs = eps_abs
        self.eps_rel = eps_rel
        self.max_iter = max_iter
        self.solver = solver
        self.assume_centered = assume_centered
        self.threads = threads

    def _config(self) -> SplcmConfig:
        return SplcmConfig(
            lam=0.0,
            gamma=self.gamma,
            delta=self.delta,
            eps_abs=self.eps_abs,
            eps_rel=self.eps_rel,
            max_iter=self.max_iter,
            solver=self.solver,
        )

    def fit(self, X, y=None):
        s, loc = empirical_covariance(X, self.assume_centered)
        self.location_ = loc
        return self._fit_cov(s, np.asarray(X).shape[0])

    def fit_covariance(self, S, n: int):
        """Fit from a sample covariance ``S`` computed from ``n`` rows."""
        s = _check_cov(S)
        self.location_ = np.zeros(s.shape[0])
        return self._fit_cov(s, int(n))

    def _fit_cov(self, s, n):
        f, info = sparse_lcm(
            s,
            n,
            lam=self.lam,
            rho=self.rho,
            tau=self.tau,
            precision=self.precision,
            cfg=self._config(),
            threads=self.threads,
        )
        self.fit_ = f
        self.covariance_ = f.sigma_hat
        self.support_ = f.active_set
        self.n_iter_ = f.iterations
        self.converged_ = f.converged
        self.lambda_ = info["lambda"]
        self.rho_ = info["rho"]
        self.bic_ = info["bic"]
        self.omega_ = info["omega"]
        self.tuning_ = info["tuning"]
        self.n_features_in_ = s.shape[0]
        return self

    def get_precision(self) -> np.ndarray:
        check_is_fitted(self, "covariance_")
        return np.linalg.inv(self.covariance_)


class SoftThresholdCovariance(BaseEstimator):
    """Soft-thresholded sample covariance, projected to be positive definite.

    ``lam=None`` selects the threshold by BIC over a grid from the largest
    off-diagonal magnitude down by a factor of 100.
    """

    def __init__(self, lam=None, delta=None, assume_centered=True):
        self.lam = lam
        self.delta = delta
        self.assume_centered = assume_centered

    def fit(self, X, y=None):
        s, loc = empirical_covariance(X, self.assume_centered)
        self.location_ = loc
        return self._fit_cov(s, np.asarray(X).shape[0])

    def fit_covariance(self, S, n: int):
        s = _check_cov(S)
        self.location_ = np.zeros(s.shape[0])
        return self._fit_cov(s, int(n))

    def _fit_cov(self, s, n):
        lambdas = None if self.lam is None else [float(self.lam)]
        res = soft_grid_search(s, n, lambdas=lambdas, delta=self.delta)
        self.covariance_ = res.sigma_hat
        self.support_ = res.support
        self.lambda_ = res.lam
        self.bic_ = res.bic
        self.delta_ = default_delta(s) if self.delta is None else self.delta
        self.n_features_in_ = s.shape[0]
        return self


class SparseQDA(ClassifierMixin, BaseEstimator):
    """Quadratic discriminant analysis with a pluggable covariance estimate.

    Parameters
    ----------
    covariance : {"splcm", "soft", "sample"} or estimator
        Per-class covariance on class-centered rows. An estimator is cloned
        per class and must expose ``covariance_`` after ``fit``.
    """

    def __init__(self, covariance="splcm"):
        self.covariance = covariance

    def _method(self):
        if isinstance(self.covariance, str):
            if self.covariance not in COVARIANCE_METHODS:
                raise ValueError(f"covariance must be one of {sorted(COVARIANCE_METHODS)}")
            return self.covariance
        template = self.covariance

        def estimate(y, n):
            return clone(template).fit(y).covariance_

        return estimate

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.model_ = qda_fit(X, y, self._method())
        self.classes_ = self.model_.classes
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return qda_discriminants(self.model_, X)

    def predict_proba(self, X):
        # the discriminant is twice the log posterior up to a shared constant
        d = 0.5 * self.decision_function(X)
        d -= d.max(axis=1, keepdims=True)
        e = np.exp(d)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

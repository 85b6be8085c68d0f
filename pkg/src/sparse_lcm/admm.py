"""ADMM for the positive-definite sparse linear covariance model.

The problem, over ``sigma = vech(Sigma)``::

    min  (1/2) (s - sigma)' P (s - sigma) + lam * ||sigma_[o]||_1
    s.t. sigma_[d] = s_[d],  Sigma >= delta * I

with ``P = (1/n) V^{-1}`` the normalized error precision. Splitting
``theta = sigma`` gives three updates per iteration:

1. ``sigma``: solve ``(P + I/gamma) x = P s + (theta - eta)/gamma`` and project
   ``unvech(x)`` onto ``{Sigma >= delta I}`` by clamping eigenvalues.
2. ``theta``: pin the diagonal to ``s_[d]`` and soft-threshold the off-diagonal
   part of ``sigma + eta`` at ``lam * gamma``.
3. ``eta``: ``eta + sigma - theta`` (scaled dual, ``eta = gamma * nu``).

The estimate is ``unvech(theta)``: its diagonal is exactly ``s_[d]`` and its
off-diagonal zeros are exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .densela import LinearOperator, cholesky_factor, conjugate_gradient, sym_eigen
from .exceptions import (
    DimensionMismatch,
    MaxIterations,
    NonConvergenceWarning,
    NotPositiveDefinite,
    SigmaUpdateFailure,
)
from .symvec import half_length, index_partition, unvech, vech
from .wishart import ErrorPrecision

__all__ = [
    "SplcmConfig",
    "AdmmState",
    "SplcmFit",
    "SigmaSolver",
    "soft_threshold",
    "pd_project",
    "solve_sigma_system",
    "sigma_update",
    "theta_update",
    "eta_update",
    "soft_threshold_estimate",
    "default_delta",
    "default_gamma",
    "lambda_max",
    "fit",
]


@dataclass(frozen=True)
class SplcmConfig:
    """ADMM settings.

    ``delta=None`` means ``1e-4 * mean(diag(S))``; ``gamma=None`` picks the
    step from the spectrum of the error precision (see :func:`default_gamma`).
    """

    lam: float
    gamma: float | None = None
    delta: float | None = None
    eps_abs: float = 1e-6
    eps_rel: float = 1e-5
    max_iter: int = 1000
    solver: str = "auto"
    cg_tol: float = 1e-8

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.solver not in ("auto", "dense", "cg"):
            raise ValueError(f"solver must be 'auto', 'dense' or 'cg', got {self.solver!r}")


@dataclass(frozen=True)
class AdmmState:
    sigma: np.ndarray
    theta: np.ndarray
    eta: np.ndarray


@dataclass
class SplcmFit:
    sigma_hat: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    active_set: np.ndarray
    converged: bool
    min_eigenvalue: float
    lam: float
    delta: float
    state: AdmmState = field(repr=False)
    pd_scale: float = 1.0
    notes: list = field(default_factory=list)

    @property
    def support_size(self) -> int:
        """Number of nonzero off-diagonal pairs ``j < k``."""
        return int(np.count_nonzero(np.triu(self.active_set, 1)))


def soft_threshold(x, t):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def pd_project(a, delta: float, method: str = "lapack") -> np.ndarray:
    """Clamp the eigenvalues of a symmetric matrix from below at ``delta``."""
    a = np.asarray(a, dtype=float)
    a = 0.5 * (a + a.T)
    if method == "lapack":
        # cheap exit when the floor is not binding
        try:
            np.linalg.cholesky(a - delta * np.eye(a.shape[0]))
            return a
        except np.linalg.LinAlgError:
            pass
    eig = sym_eigen(a, method=method)
    if eig.values[-1] >= delta:
        return a
    out = eig.reconstruct(np.maximum(eig.values, delta))
    return 0.5 * (out + out.T)


def default_delta(s) -> float:
    return 1e-4 * float(np.mean(np.diag(s)))


def default_gamma(ep: ErrorPrecision) -> float:
    """``1 / sqrt(mu_min * mu_max)`` over the eigenvalues ``mu`` of ``P``.

    With ``Omega`` available the extremes are ``w_min**2`` and ``w_max**2``
    up to a factor of two, so its own spectrum suffices.
    """
    if ep.omega is not None:
        w = np.abs(np.linalg.eigvalsh(ep.omega))
    else:
        w = np.sqrt(np.abs(np.linalg.eigvalsh(ep.dense())))
    lo, hi = float(w.min()), float(w.max())
    if hi == 0.0:
        return 1.0
    if lo <= 1e-8 * hi:
        lo = 1e-8 * hi
    return 1.0 / (lo * hi)


class SigmaSolver:
    """Solves ``(P + I/gamma) x = rhs``, factoring once for repeated use.

    The dense path keeps the explicit inverse: every ADMM iteration then costs
    one matrix-vector product instead of two triangular solves.
    """

    def __init__(self, ep: ErrorPrecision, gamma: float, method: str = "auto", cg_tol: float = 1e-8):
        if method == "auto":
            method = "dense" if ep.mode == "explicit" else "cg"
        self.ep = ep
        self.gamma = gamma
        self.method = method
        self.cg_tol = cg_tol
        if method == "dense":
            m = ep.dense() + np.eye(ep.dim) / gamma
            try:
                self._inv = cholesky_factor(m).inverse()
            except NotPositiveDefinite as exc:
                raise SigmaUpdateFailure(f"sigma system is not positive definite: {exc}") from exc
        elif method == "cg":
            self._op = LinearOperator(ep.dim, lambda x: ep.apply(x) + x / gamma)
        else:
            raise ValueError(f"unknown solver {method!r}")

    def solve(self, rhs, x0=None) -> np.ndarray:
        if self.method == "dense":
            return self._inv @ rhs
        try:
            return conjugate_gradient(self._op, rhs, tol=self.cg_tol, x0=x0)
        except MaxIterations as exc:
            raise SigmaUpdateFailure(str(exc)) from exc


def solve_sigma_system(state: AdmmState, ep: ErrorPrecision, s_vec, gamma: float, solver=None) -> np.ndarray:
    """Unconstrained minimizer over sigma (before the PD projection)."""
    if solver is None:
        solver = SigmaSolver(ep, gamma)
    rhs = ep.apply(s_vec) + (state.theta - state.eta) / gamma
    return solver.solve(rhs, x0=state.sigma)


def sigma_update(state: AdmmState, ep: ErrorPrecision, s_vec, cfg: SplcmConfig, delta: float, solver=None):
    gamma = default_gamma(ep) if cfg.gamma is None else cfg.gamma
    raw = solve_sigma_system(state, ep, s_vec, gamma, solver=solver)
    return vech(pd_project(unvech(raw), delta))


def theta_update(sigma, eta, s_d, lam: float, gamma: float) -> np.ndarray:
    """Pin ``[d]`` to ``s_d``; soft-threshold ``[o]`` of ``sigma + eta`` at ``lam*gamma``."""
    sigma = np.asarray(sigma, dtype=float)
    part = index_partition(int(len(s_d)))
    theta = np.empty_like(sigma)
    theta[part.o] = soft_threshold(sigma[part.o] + eta[part.o], lam * gamma)
    theta[part.d] = s_d
    return theta


def eta_update(eta, sigma, theta) -> np.ndarray:
    return eta + (sigma - theta)


def soft_threshold_estimate(s, thresholds) -> np.ndarray:
    """Closed-form estimate under a diagonal error covariance.

    Diagonal kept, off-diagonal entries soft-thresholded at ``thresholds``
    (a scalar or a ``p x p`` array of per-entry levels). Not PD-projected.
    """
    s = np.asarray(s, dtype=float)
    t = np.broadcast_to(np.asarray(thresholds, dtype=float), s.shape)
    if np.any(t < 0):
        raise ValueError("thresholds must be >= 0")
    out = soft_threshold(s, t)
    np.fill_diagonal(out, np.diag(s))
    return 0.5 * (out + out.T)


def lambda_max(s, ep: ErrorPrecision) -> float:
    """Smallest ``lam`` for which the diagonal matrix ``diag(S)`` is a fixed point."""
    part = index_partition(ep.p)
    resid = vech(s)
    resid[part.d] = 0.0
    return float(np.abs(ep.apply(resid)[part.o]).max(initial=0.0))


def _restore_pd(diag_vals: np.ndarray, offdiag: np.ndarray, delta: float) -> tuple[np.ndarray, float]:
    """Largest ``t <= 1`` with ``diag + t * offdiag >= delta``; zeros stay zeros."""
    base = np.diag(diag_vals)
    full = base + offdiag
    if np.linalg.eigvalsh(full)[0] >= delta:
        return full, 1.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.linalg.eigvalsh(base + mid * offdiag)[0] >= delta:
            lo = mid
        else:
            hi = mid
    return base + lo * offdiag, lo


def fit(s, ep: ErrorPrecision, cfg: SplcmConfig, init=None, solver: SigmaSolver | None = None) -> SplcmFit:
    """Run the ADMM to convergence (or ``cfg.max_iter``)."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"S must be square, got shape {s.shape}")
    p = s.shape[0]
    if ep.p != p:
        raise DimensionMismatch(f"error precision is for p={ep.p}, S has p={p}")
    s = 0.5 * (s + s.T)
    part = index_partition(p)
    L = half_length(p)
    delta = default_delta(s) if cfg.delta is None else cfg.delta
    notes = []

    s_vec = vech(s)
    s_d = s_vec[part.d].copy()
    if np.any(s_d < delta):
        # a pinned variance below the PD floor cannot be kept exactly
        s_d = np.maximum(s_d, delta)
        s_vec[part.d] = s_d
        notes.append("sample variances below delta were raised to delta")

    gamma = default_gamma(ep) if cfg.gamma is None else cfg.gamma
    if solver is None or solver.gamma != gamma or solver.ep is not ep:
        solver = SigmaSolver(ep, gamma, cfg.solver, cfg.cg_tol)
    rhs_const = ep.apply(s_vec)

    if init is None:
        start = vech(pd_project(s, delta))
        sigma, theta, eta = start.copy(), start.copy(), np.zeros(L)
    else:
        st = init.state if isinstance(init, SplcmFit) else init
        sigma, theta, eta = st.sigma.copy(), st.theta.copy(), st.eta.copy()

    sqrt_l = np.sqrt(L)
    r_norm = d_norm = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        raw = solver.solve(rhs_const + (theta - eta) / gamma, x0=sigma)
        if not np.all(np.isfinite(raw)):
            raise SigmaUpdateFailure("non-finite sigma update")
        sigma = vech(pd_project(unvech(raw), delta))
        theta_old = theta
        theta = theta_update(sigma, eta, s_d, cfg.lam, gamma)
        eta = eta_update(eta, sigma, theta)
        r_norm = float(np.linalg.norm(sigma - theta))
        d_norm = float(np.linalg.norm(theta - theta_old)) / gamma
        eps = cfg.eps_abs * sqrt_l + cfg.eps_rel * max(np.linalg.norm(sigma), np.linalg.norm(theta))
        if r_norm <= eps and d_norm <= eps:
            converged = True
            break

    if not converged:
        warnings.warn(
            f"ADMM did not converge in {cfg.max_iter} iterations "
            f"(primal {r_norm:.3g}, dual {d_norm:.3g})",
            NonConvergenceWarning,
            stacklevel=2,
        )

    offdiag = unvech(theta)
    np.fill_diagonal(offdiag, 0.0)
    sigma_hat, scale = _restore_pd(s_d, offdiag, delta)
    if scale < 1.0:
        notes.append(f"off-diagonals scaled by {scale:.10g} to meet the PD floor")
    np.fill_diagonal(sigma_hat, s_d)
    active = offdiag != 0.0
    return SplcmFit(
        sigma_hat=sigma_hat,
        iterations=it,
        primal_residual=r_norm,
        dual_residual=d_norm,
        active_set=active,
        converged=converged,
        min_eigenvalue=float(np.linalg.eigvalsh(sigma_hat)[0]),
        lam=cfg.lam,
        delta=delta,
        state=AdmmState(sigma=sigma, theta=theta, eta=eta),
        pd_scale=scale,
        notes=notes,
    )


def with_lam(cfg: SplcmConfig, lam: float) -> SplcmConfig:
    return replace(cfg, lam=lam)

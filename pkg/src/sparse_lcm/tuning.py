"""BIC selection of the penalty ``lam`` and the CLIME level ``rho``.

For each ``rho`` the plug-in precision and the sigma-system solver are built
once; the ``lam`` grid is then swept in descending order with warm starts.
Distinct ``rho`` rows are independent and may run on a thread pool.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .admm import (
    SigmaSolver,
    SplcmConfig,
    SplcmFit,
    default_delta,
    default_gamma,
    fit,
    lambda_max,
    pd_project,
    soft_threshold_estimate,
)
from .densela import cholesky_factor
from .exceptions import AllCellsFailed, NonConvergenceWarning, NumericalError
from .clime import plugin_precision
from .wishart import build_error_precision

__all__ = [
    "TuneGrid",
    "TuneRow",
    "TuneResult",
    "bic_score",
    "default_lambdas",
    "default_rhos",
    "grid_search",
    "lambda_path",
    "soft_grid_search",
]

N_LAMBDAS = 20
LAMBDA_RATIO = 100.0
RHO_MULTIPLIERS = (0.05, 0.1, 0.2, 0.4)


@dataclass(frozen=True)
class TuneGrid:
    """Candidate values. ``lambdas=None`` means a per-``rho`` default path."""

    lambdas: tuple | None = None
    rhos: tuple | None = None

    def __post_init__(self):
        for name in ("lambdas", "rhos"):
            vals = getattr(self, name)
            if vals is None:
                continue
            arr = np.asarray(vals, dtype=float)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError(f"{name} must be a nonempty 1-d grid")
            if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite and strictly positive")
            object.__setattr__(self, name, tuple(float(v) for v in arr))


@dataclass(frozen=True)
class TuneRow:
    lam: float
    rho: float
    bic: float
    support: int
    converged: bool


@dataclass
class TuneResult:
    lam: float
    rho: float
    fit: SplcmFit
    bic: float
    omega: np.ndarray
    table: list = field(default_factory=list)

    def table_array(self) -> np.ndarray:
        """Rows ``(lam, rho, bic, support, converged)`` as floats."""
        return np.array(
            [(r.lam, r.rho, r.bic, r.support, float(r.converged)) for r in self.table],
            dtype=float,
        ).reshape(-1, 5)


def bic_score(s, sigma_hat, n: int, support: int | None = None) -> float:
    """``n log det Sigma + n tr(S Sigma^{-1}) + log(n) * support``.

    ``sigma_hat`` is a :class:`SplcmFit` or a matrix; for a plain matrix the
    support is counted from its exact nonzeros above the diagonal unless
    ``support`` is given.
    """
    s = np.asarray(s, dtype=float)
    if isinstance(sigma_hat, SplcmFit):
        mat = sigma_hat.sigma_hat
        if support is None:
            support = sigma_hat.support_size
    else:
        mat = np.asarray(sigma_hat, dtype=float)
        if support is None:
            support = int(np.count_nonzero(np.triu(mat, 1)))
    chol = cholesky_factor(mat)
    trace = float(np.trace(chol.solve(s)))
    return n * chol.logdet() + n * trace + np.log(n) * support


def default_lambdas(lam_max: float, num: int = N_LAMBDAS, ratio: float = LAMBDA_RATIO) -> np.ndarray:
    """Descending log-spaced grid from ``lam_max`` to ``lam_max / ratio``."""
    if not lam_max > 0:
        # nothing to shrink: every lam gives the diagonal estimate
        lam_max = 1.0
    return np.geomspace(lam_max, lam_max / ratio, num)


def default_rhos(p: int, n: int) -> np.ndarray:
    return np.asarray(RHO_MULTIPLIERS) * np.sqrt(np.log(p) / n)


def _sweep(s, n, omega, rho, lambdas, cfg):
    """Warm-started descending sweep for one precision; returns rows and fits."""
    ep = build_error_precision(omega, n)
    gamma = default_gamma(ep) if cfg.gamma is None else cfg.gamma
    solver = SigmaSolver(ep, gamma, method=cfg.solver, cg_tol=cfg.cg_tol)
    if lambdas is None:
        lambdas = default_lambdas(lambda_max(s, ep))
    lambdas = np.sort(np.asarray(lambdas, dtype=float))[::-1]
    rows, fits = [], []
    prev = None
    for lam in lambdas:
        step = SplcmConfig(
            lam=float(lam),
            gamma=gamma,
            delta=cfg.delta,
            eps_abs=cfg.eps_abs,
            eps_rel=cfg.eps_rel,
            max_iter=cfg.max_iter,
            solver=cfg.solver,
            cg_tol=cfg.cg_tol,
        )
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NonConvergenceWarning)
                f = fit(s, ep, step, init=prev, solver=solver)
            score = bic_score(s, f, n)
        except NumericalError:
            rows.append(TuneRow(float(lam), rho, float("nan"), 0, False))
            fits.append(None)
            prev = None
            continue
        prev = f
        rows.append(TuneRow(float(lam), rho, float(score), f.support_size, f.converged))
        fits.append(f)
    return rows, fits


def lambda_path(s, n: int, omega, lambdas=None, cfg: SplcmConfig | None = None):
    """Warm-started fits along a descending ``lam`` grid for a fixed ``Omega``.

    Returns a list of ``(lam, fit)``; ``fit`` is ``None`` where the solve failed.
    """
    s = np.asarray(s, dtype=float)
    cfg = SplcmConfig(lam=0.0) if cfg is None else cfg
    rows, fits = _sweep(0.5 * (s + s.T), n, np.asarray(omega, dtype=float), float("nan"), lambdas, cfg)
    return [(r.lam, f) for r, f in zip(rows, fits)]


def _select(rows, fits, omegas):
    best = None
    for i, (row, f) in enumerate(zip(rows, fits)):
        if f is None or not row.converged or not np.isfinite(row.bic):
            continue
        # ties: larger lam, then larger rho
        key = (row.bic, -row.lam, -row.rho)
        if best is None or key < best[0]:
            best = (key, i)
    if best is None:
        raise AllCellsFailed("no grid cell converged")
    i = best[1]
    return rows[i], fits[i], omegas[i]


def grid_search(
    s,
    n: int,
    grid: TuneGrid | None = None,
    cfg: SplcmConfig | None = None,
    tau: float | None = None,
    precision=None,
    threads: int = 1,
) -> TuneResult:
    """Minimize BIC over ``(lam, rho)``.

    Parameters
    ----------
    s : ndarray of shape (p, p)
        Sample covariance.
    n : int
        Sample size behind ``s``.
    grid : TuneGrid, optional
        Candidate values; defaults from :func:`default_lambdas` and
        :func:`default_rhos`. If no default ``rho`` gives a feasible CLIME
        problem, the largest is doubled until one does.
    cfg : SplcmConfig, optional
        ADMM settings; its ``lam`` is ignored.
    tau : float, optional
        CLIME hard threshold (defaults to each ``rho``).
    precision : ndarray, optional
        A fixed ``Omega`` (e.g. the true precision in simulations). The
        ``rho`` grid is then skipped and reported as ``nan``.
    threads : int
        Worker threads across ``rho`` rows.

    Returns
    -------
    TuneResult
        The selected cell and the full table in grid order.
    """
    s = np.asarray(s, dtype=float)
    s = 0.5 * (s + s.T)
    p = s.shape[0]
    grid = TuneGrid() if grid is None else grid
    cfg = SplcmConfig(lam=0.0) if cfg is None else cfg
    lambdas = grid.lambdas

    if precision is not None:
        jobs = [(float("nan"), np.asarray(precision, dtype=float))]
    else:
        rhos = default_rhos(p, n) if grid.rhos is None else np.asarray(grid.rhos)
        jobs = [(float(r), None) for r in np.sort(rhos)]

    def run(job):
        rho, omega = job
        if omega is None:
            try:
                omega = plugin_precision(s, rho, tau)
            except NumericalError:
                lams = lambdas if lambdas is not None else [float("nan")]
                return [TuneRow(float(l), rho, float("nan"), 0, False) for l in lams], [None] * len(lams), None
        rows, fits = _sweep(s, n, omega, rho, lambdas, cfg)
        return rows, fits, omega

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(run, jobs))
    else:
        outs = [run(j) for j in jobs]

    if precision is None and grid.rhos is None and all(o[2] is None for o in outs):
        # every default level was infeasible (typically n close to p): keep
        # doubling; rho >= 1 is always feasible since Omega = 0 qualifies
        rho = float(jobs[-1][0])
        while outs[-1][2] is None and rho < 1.0:
            rho = min(2.0 * rho, 1.0)
            outs.append(run((rho, None)))

    rows, fits, omegas = [], [], []
    for r, f, om in outs:
        rows.extend(r)
        fits.extend(f)
        omegas.extend([om] * len(r))
    row, best_fit, omega = _select(rows, fits, omegas)
    return TuneResult(lam=row.lam, rho=row.rho, fit=best_fit, bic=row.bic, omega=omega, table=rows)


@dataclass
class SoftTuneResult:
    lam: float
    sigma_hat: np.ndarray
    support: np.ndarray
    bic: float
    table: list = field(default_factory=list)


def soft_grid_search(s, n: int, lambdas=None, delta: float | None = None) -> SoftTuneResult:
    """BIC-tuned soft thresholding followed by the PD projection.

    The support is the soft-thresholded pattern (the projection densifies
    the matrix). The default grid runs from ``max |s_jk|`` down by a factor
    of 100.
    """
    s = np.asarray(s, dtype=float)
    s = 0.5 * (s + s.T)
    delta = default_delta(s) if delta is None else delta
    off = np.abs(s - np.diag(np.diag(s)))
    if lambdas is None:
        lambdas = default_lambdas(float(off.max()))
    lambdas = np.sort(np.asarray(lambdas, dtype=float))[::-1]
    best, table = None, []
    for lam in lambdas:
        st = soft_threshold_estimate(s, lam)
        support = st != 0.0
        np.fill_diagonal(support, False)
        sh = pd_project(st, delta)
        count = int(np.count_nonzero(np.triu(support, 1)))
        score = bic_score(s, sh, n, support=count)
        table.append(TuneRow(float(lam), float("nan"), float(score), count, True))
        if best is None or score < best[0]:
            best = (score, float(lam), sh, support)
    return SoftTuneResult(lam=best[1], sigma_hat=best[2], support=best[3], bic=best[0], table=table)

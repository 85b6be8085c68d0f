"""CLIME estimate of the inverse covariance used to build the error precision.

Each column solves ``min ||b||_1  s.t.  ||S b - e_k||_inf <= rho`` as a linear
program over the split ``b = u - v`` (``u, v >= 0``). The column solutions are
symmetrized by keeping the smaller-magnitude entry of each mirrored pair and
then hard-thresholded on magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densela import simplex_lp
from .exceptions import DimensionMismatch, Infeasible

__all__ = ["ClimeConfig", "clime_solve", "clime_threshold", "clime_precision", "plugin_precision"]

FEASIBILITY_SLACK = 1e-8
PLUGIN_FLOOR_REL = 1e-2


@dataclass(frozen=True)
class ClimeConfig:
    rho: float
    tau: float | None = None
    symmetrize: bool = True

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.tau is not None and self.tau < 0:
            raise ValueError("tau must be >= 0")

    @property
    def threshold(self) -> float:
        return self.rho if self.tau is None else self.tau


def _column(s: np.ndarray, k: int, rho: float) -> np.ndarray:
    p = s.shape[0]
    e = np.zeros(p)
    e[k] = 1.0
    a_ub = np.block([[s, -s], [-s, s]])
    b_ub = np.concatenate([rho + e, rho - e])
    try:
        uv = simplex_lp(np.ones(2 * p), a_ub, b_ub)
    except Infeasible as exc:
        raise Infeasible(f"CLIME column {k} infeasible at rho={rho}: {exc}") from exc
    return uv[:p] - uv[p:]


def symmetrize_min_magnitude(omega: np.ndarray) -> np.ndarray:
    keep = np.abs(omega) <= np.abs(omega.T)
    return np.where(keep, omega, omega.T)


def clime_solve(s, rho: float, symmetrize: bool = True, return_raw: bool = False):
    """Column-wise CLIME solution of ``min ||Omega||_1 s.t. ||S Omega - I||_max <= rho``.

    Feasibility of the column solutions is checked before symmetrizing. With
    ``return_raw=True`` the unsymmetrized column matrix is returned as well.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"S must be square, got shape {s.shape}")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    p = s.shape[0]
    raw = np.column_stack([_column(s, k, rho) for k in range(p)])
    viol = np.abs(s @ raw - np.eye(p)).max()
    if viol > rho + FEASIBILITY_SLACK:
        raise Infeasible(f"CLIME solution violates the constraint: {viol:.3g} > {rho:.3g}")
    omega = symmetrize_min_magnitude(raw) if symmetrize else raw
    if return_raw:
        return omega, raw
    return omega


def clime_threshold(omega_tilde, tau: float) -> np.ndarray:
    """Zero every entry with ``|omega| < tau``."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    omega_tilde = np.asarray(omega_tilde, dtype=float)
    return np.where(np.abs(omega_tilde) >= tau, omega_tilde, 0.0)


def clime_precision(s, rho: float, tau: float | None = None) -> np.ndarray:
    """Thresholded, symmetric CLIME estimate; ``tau`` defaults to ``rho``."""
    cfg = ClimeConfig(rho=rho, tau=tau)
    return clime_threshold(clime_solve(s, cfg.rho, symmetrize=cfg.symmetrize), cfg.threshold)


def plugin_precision(s, rho: float, tau: float | None = None, floor_rel: float = PLUGIN_FLOOR_REL) -> np.ndarray:
    """CLIME estimate made positive definite for use inside the error precision.

    The thresholded, min-magnitude-symmetrized matrix can be indefinite, and
    an indefinite ``Omega`` makes the quadratic loss non-convex. Eigenvalues
    are clamped from below at ``floor_rel * max(eigenvalue)``; an all-zero
    estimate falls back to ``diag(1 / s_jj)`` with the variances floored at
    ``floor_rel * max(s_jj)``, which bounds its condition number the same way
    and keeps a constant coordinate finite.
    """
    omega = clime_precision(s, rho, tau)
    w, q = np.linalg.eigh(omega)
    if w[-1] <= 0.0:
        d = np.diag(np.asarray(s, dtype=float))
        if not d.max() > 0.0:
            return np.eye(len(d))
        return np.diag(1.0 / np.maximum(d, floor_rel * d.max()))
    floor = floor_rel * w[-1]
    if w[0] >= floor:
        return omega
    out = (q * np.maximum(w, floor)) @ q.T
    return 0.5 * (out + out.T)

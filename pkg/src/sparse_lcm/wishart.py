"""Gaussian (Wishart) covariance of vech(S) and its plug-in precision.

For Gaussian data the covariance between two sample covariances is::

    Cov(s_jk, s_lm) = (sigma_jl sigma_km + sigma_jm sigma_kl) / n

which is the entry of ``(2/n) D^+ (Sigma x Sigma) D^+'`` for the vech
positions of (j, k) and (l, m). The inverse is built from a precision
estimate ``Omega`` as ``(n/2) D' (Omega x Omega) D``. The estimator only ever
uses the normalized operator ``(1/n) V^{-1}``, whose action on a half-vector
``x`` with ``X = unvech(x)`` is ``vech(Omega X Omega)`` with the diagonal
positions halved. No Kronecker product is formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densela import LinearOperator
from .exceptions import DimensionMismatch, DimensionTooLarge
from .symvec import half_length, index_partition, unvech

__all__ = [
    "ErrorPrecision",
    "EXPLICIT_MAX_P",
    "build_error_cov",
    "build_error_precision",
    "apply_precision",
    "default_mode",
]

EXPLICIT_MAX_P = 60


def default_mode(p: int) -> str:
    return "explicit" if p <= EXPLICIT_MAX_P else "implicit"


def _pair_products(m: np.ndarray) -> np.ndarray:
    """``m_jl m_km + m_jm m_kl`` over all pairs of vech positions."""
    part = index_partition(m.shape[0])
    r, c = part.rows, part.cols
    return m[np.ix_(r, r)] * m[np.ix_(c, c)] + m[np.ix_(r, c)] * m[np.ix_(c, r)]


def _as_square(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    return m


def build_error_cov(sigma, n: int, max_p: int = EXPLICIT_MAX_P) -> np.ndarray:
    """Explicit ``L x L`` covariance of ``vech(S)`` for ``S`` from ``n`` Gaussian rows."""
    sigma = _as_square(sigma, "sigma")
    if sigma.shape[0] > max_p:
        raise DimensionTooLarge(f"explicit error covariance capped at p <= {max_p}")
    if n < 1:
        raise ValueError("n must be >= 1")
    return _pair_products(sigma) / n


@dataclass(frozen=True)
class ErrorPrecision:
    """The normalized error precision ``(1/n) V^{-1}``.

    Holds ``omega`` and, in explicit mode, the cached ``L x L`` matrix.
    ``matrix`` may also be supplied directly (e.g. from a bootstrap
    estimate of V), in which case ``omega`` is ``None``.
    """

    p: int
    n: int
    omega: np.ndarray | None
    mode: str
    matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return half_length(self.p)

    def apply(self, x) -> np.ndarray:
        return apply_precision(self, x)

    def dense(self) -> np.ndarray:
        """The ``L x L`` matrix of ``(1/n) V^{-1}`` (computed if not cached)."""
        if self.matrix is not None:
            return self.matrix
        if self.p > EXPLICIT_MAX_P:
            raise DimensionTooLarge(f"explicit error precision capped at p <= {EXPLICIT_MAX_P}")
        return _normalized_precision_matrix(self.omega)

    def as_operator(self, shift: float = 0.0) -> LinearOperator:
        """Operator ``x -> (1/n) V^{-1} x + shift * x``."""
        if shift == 0.0:
            return LinearOperator(self.dim, self.apply)
        return LinearOperator(self.dim, lambda x: self.apply(x) + shift * x)

    @classmethod
    def from_error_cov(cls, v, n: int) -> "ErrorPrecision":
        """Explicit precision from an estimate of ``Cov{vech(S)}``.

        Uses the pseudo-inverse, so a rank-deficient ``v`` is accepted.
        """
        v = _as_square(v, "v")
        p = int((np.sqrt(8 * v.shape[0] + 1) - 1) // 2)
        if half_length(p) != v.shape[0]:
            raise DimensionMismatch(f"size {v.shape[0]} is not p(p+1)/2")
        prec = np.linalg.pinv(0.5 * (v + v.T), hermitian=True) / n
        return cls(p=p, n=n, omega=None, mode="explicit", matrix=0.5 * (prec + prec.T))


def _normalized_precision_matrix(omega: np.ndarray) -> np.ndarray:
    # (1/2) D'(O x O)D has entry f_ab * m_a * m_b / 2 with m = 1 on [d], 2 on [o];
    # the extra 1/2 comes from (1/n)(n/2).
    p = omega.shape[0]
    part = index_partition(p)
    m = np.where(part.rows == part.cols, 1.0, 2.0)
    mat = _pair_products(omega) * np.outer(m, m) / 4.0
    return 0.5 * (mat + mat.T)


def build_error_precision(omega, n: int, mode: str | None = None) -> ErrorPrecision:
    """Wrap a symmetric precision estimate as the operator ``(1/n) V^{-1}``."""
    omega = _as_square(omega, "omega")
    omega = 0.5 * (omega + omega.T)
    if n < 1:
        raise ValueError("n must be >= 1")
    p = omega.shape[0]
    if mode is None:
        mode = default_mode(p)
    if mode == "explicit":
        if p > EXPLICIT_MAX_P:
            raise DimensionTooLarge(f"explicit error precision capped at p <= {EXPLICIT_MAX_P}")
        matrix = _normalized_precision_matrix(omega)
    elif mode == "implicit":
        matrix = None
    else:
        raise ValueError(f"mode must be 'explicit' or 'implicit', got {mode!r}")
    omega.setflags(write=False)
    if matrix is not None:
        matrix.setflags(write=False)
    return ErrorPrecision(p=p, n=n, omega=omega, mode=mode, matrix=matrix)


def apply_precision(ep: ErrorPrecision, x) -> np.ndarray:
    """``(1/n) V^{-1} x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (ep.dim,):
        raise DimensionMismatch(f"expected a half-vector of length {ep.dim}, got shape {x.shape}")
    if ep.matrix is not None:
        return ep.matrix @ x
    part = index_partition(ep.p)
    w = ep.omega @ unvech(x) @ ep.omega
    out = w[part.rows, part.cols]
    out[part.d] *= 0.5
    return out

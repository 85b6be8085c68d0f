"""Half-vectorization of symmetric matrices and duplication-matrix actions.

``vech`` stacks the lower triangle row by row::

    vech(A) = (A11, A21, A22, A31, A32, A33, ..., Ap1, ..., App)

so the diagonal entries sit at the 1-indexed positions ``k(k+1)/2``. Internally
all positions are 0-indexed; :class:`IndexPartition` exposes both.

The duplication matrix ``D_p`` (``D_p vech(A) = vec(A)``) and its
Moore-Penrose inverse are applied as index maps. :func:`duplication_matrix`
builds the explicit matrix for small ``p`` only, for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import LengthMismatch, NonTriangularLength

__all__ = [
    "IndexPartition",
    "half_length",
    "dim_from_length",
    "index_partition",
    "vech",
    "unvech",
    "dup_apply",
    "dup_transpose_apply",
    "dup_pinv_apply",
    "duplication_matrix",
    "offdiag_weights",
]

EXPLICIT_DUP_MAX_P = 8


def half_length(p: int) -> int:
    return p * (p + 1) // 2


def dim_from_length(length: int) -> int:
    """Return ``p`` with ``p(p+1)/2 == length`` or raise NonTriangularLength."""
    if length < 1:
        raise NonTriangularLength(f"length {length} is not a positive triangular number")
    p = int((np.sqrt(8 * length + 1) - 1) // 2)
    # guard against float rounding on large lengths
    for cand in (p - 1, p, p + 1):
        if cand >= 1 and half_length(cand) == length:
            return cand
    raise NonTriangularLength(f"length {length} is not a triangular number p(p+1)/2")


@lru_cache(maxsize=64)
def _tril(p: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.tril_indices(p)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@dataclass(frozen=True)
class IndexPartition:
    """Diagonal/off-diagonal split of the ``vech`` positions.

    ``d`` and ``o`` are 0-indexed position arrays; ``d1``/``o1`` give the
    1-indexed convention (``d1 == {k(k+1)/2 : k = 1..p}``).
    """

    p: int
    d: np.ndarray
    o: np.ndarray
    rows: np.ndarray
    cols: np.ndarray

    @property
    def length(self) -> int:
        return half_length(self.p)

    @property
    def d1(self) -> np.ndarray:
        return self.d + 1

    @property
    def o1(self) -> np.ndarray:
        return self.o + 1

    @property
    def is_offdiag(self) -> np.ndarray:
        return self.rows != self.cols


@lru_cache(maxsize=64)
def index_partition(p: int) -> IndexPartition:
    if p < 1:
        raise ValueError("p must be >= 1")
    rows, cols = _tril(p)
    k = np.arange(1, p + 1)
    d = k * (k + 1) // 2 - 1
    mask = np.ones(half_length(p), dtype=bool)
    mask[d] = False
    o = np.flatnonzero(mask)
    for arr in (d, o):
        arr.setflags(write=False)
    return IndexPartition(p=p, d=d, o=o, rows=rows, cols=cols)


def vech(a) -> np.ndarray:
    """Lower-triangle half-vectorization of a square matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    rows, cols = _tril(a.shape[0])
    return a[rows, cols].copy()


def unvech(x) -> np.ndarray:
    """Symmetric matrix whose ``vech`` is ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("unvech expects a 1-d vector")
    p = dim_from_length(x.size)
    rows, cols = _tril(p)
    out = np.empty((p, p))
    out[rows, cols] = x
    out[cols, rows] = x
    return out


def offdiag_weights(p: int) -> np.ndarray:
    """Diagonal of ``D_p^T D_p`` over vech positions: 1 at [d], 2 at [o]."""
    w = np.full(half_length(p), 2.0)
    w[index_partition(p).d] = 1.0
    return w


def _square_from_vec(y, name: str) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise LengthMismatch(f"{name} expects a 1-d vector")
    p = int(round(np.sqrt(y.size)))
    if p < 1 or p * p != y.size:
        raise LengthMismatch(f"length {y.size} is not a perfect square p**2")
    # vec() stacks columns
    return y.reshape((p, p), order="F")


def dup_apply(x) -> np.ndarray:
    """``D_p x``: expand a half-vector to ``vec`` of the symmetric matrix."""
    return unvech(x).ravel(order="F")


def dup_transpose_apply(y) -> np.ndarray:
    """``D_p^T y``: diagonal entries copied, mirrored pairs summed."""
    b = _square_from_vec(y, "dup_transpose_apply")
    c = b + b.T
    c[np.diag_indices_from(c)] *= 0.5
    return vech(c)


def dup_pinv_apply(y) -> np.ndarray:
    """``D_p^+ y = (D_p^T D_p)^{-1} D_p^T y``: mirrored pairs averaged."""
    b = _square_from_vec(y, "dup_pinv_apply")
    return vech(0.5 * (b + b.T))


def duplication_matrix(p: int) -> np.ndarray:
    """Explicit ``p^2 x p(p+1)/2`` duplication matrix (small ``p`` only)."""
    if p > EXPLICIT_DUP_MAX_P:
        raise ValueError(f"explicit duplication matrix is capped at p <= {EXPLICIT_DUP_MAX_P}")
    L = half_length(p)
    part = index_partition(p)
    dmat = np.zeros((p * p, L))
    for pos, (j, k) in enumerate(zip(part.rows, part.cols)):
        dmat[k * p + j, pos] = 1.0
        dmat[j * p + k, pos] = 1.0
    return dmat

"""Dense linear-algebra kernels used by the estimator.

Symmetric eigendecomposition (LAPACK or a parallel-ordered cyclic Jacobi),
Cholesky factor/solve, conjugate gradient on matrix-free operators, power
iteration for the spectral norm, and a two-phase dense-tableau simplex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import (
    DimensionMismatch,
    Infeasible,
    MaxIterations,
    NoConvergence,
    NotPositiveDefinite,
    Unbounded,
)

__all__ = [
    "EigenDecomp",
    "LinearOperator",
    "CholeskyFactor",
    "sym_eigen",
    "jacobi_eigh",
    "cholesky_factor",
    "cholesky_solve",
    "conjugate_gradient",
    "operator_norm",
    "simplex_lp",
]


@dataclass(frozen=True)
class EigenDecomp:
    """Eigenvalues in descending order with matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self, values=None) -> np.ndarray:
        lam = self.values if values is None else values
        q = self.vectors
        return (q * lam) @ q.T


def _check_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def _round_robin(m: int):
    """Yield rounds of disjoint index pairs covering all pairs of range(m)."""
    players = list(range(m + (m % 2)))
    k = len(players)
    for _ in range(k - 1):
        yield [(players[i], players[k - 1 - i]) for i in range(k // 2)]
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 30) -> EigenDecomp:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Each sweep visits every off-diagonal pair once, grouped into rounds of
    disjoint pairs so the rotations of one round are applied together as a
    single orthogonal matrix. Stops when the off-diagonal Frobenius norm is at
    most ``tol * ||A||_F``.
    """
    a = _check_square(a)
    p = a.shape[0]
    work = 0.5 * (a + a.T)
    vecs = np.eye(p)
    scale = np.linalg.norm(work)
    rounds = [
        np.array([(min(i, j), max(i, j)) for i, j in rnd if i < p and j < p], dtype=int).reshape(-1, 2)
        for rnd in _round_robin(p)
    ]

    def off_norm(m):
        return np.linalg.norm(m - np.diag(np.diag(m)))

    sweeps = 0
    while off_norm(work) > tol * scale:
        if sweeps >= max_sweeps:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
        for pairs in rounds:
            if pairs.size == 0:
                continue
            P, Q = pairs[:, 0], pairs[:, 1]
            apq = work[P, Q]
            app = work[P, P]
            aqq = work[Q, Q]
            # skip pairs whose rotation angle would underflow
            active = np.abs(apq) > 1e-300 + 1e-18 * np.abs(aqq - app)
            t = np.zeros_like(apq)
            theta = (aqq[active] - app[active]) / (2.0 * apq[active])
            ta = 1.0 / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[active] = np.where(theta < 0.0, -ta, ta)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(p)
            rot[P, P] = c
            rot[Q, Q] = c
            rot[P, Q] = s
            rot[Q, P] = -s
            work = rot.T @ work @ rot
            work = 0.5 * (work + work.T)
            vecs = vecs @ rot
        sweeps += 1

    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    return EigenDecomp(values=values[order], vectors=vecs[:, order])


def sym_eigen(a, method: str = "lapack") -> EigenDecomp:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    ``method="lapack"`` calls the LAPACK symmetric driver through numpy and is
    what the ADMM loop uses; ``method="jacobi"`` runs :func:`jacobi_eigh`.
    """
    a = _check_square(a)
    if method == "jacobi":
        return jacobi_eigh(a)
    if method != "lapack":
        raise ValueError(f"unknown eigen method {method!r}")
    try:
        values, vectors = np.linalg.eigh(0.5 * (a + a.T))
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return EigenDecomp(values=values[::-1].copy(), vectors=vectors[:, ::-1].copy())


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor of an SPD matrix, reusable across solves."""

    factor: tuple

    @property
    def dim(self) -> int:
        return self.factor[0].shape[0]

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.dim:
            raise DimensionMismatch(f"rhs length {b.shape[0]} != {self.dim}")
        return scipy.linalg.cho_solve(self.factor, b, check_finite=False)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.factor[0]))))

    def inverse(self) -> np.ndarray:
        inv = scipy.linalg.cho_solve(self.factor, np.eye(self.dim), check_finite=False)
        return 0.5 * (inv + inv.T)


def cholesky_factor(a) -> CholeskyFactor:
    a = _check_square(a)
    try:
        fac = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if not np.all(np.diag(fac[0]) > 0) or not np.all(np.isfinite(fac[0])):
        raise NotPositiveDefinite("non-positive pivot in Cholesky factorization")
    return CholeskyFactor(fac)


def cholesky_solve(a, b) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive definite ``a``."""
    return cholesky_factor(a).solve(b)


@dataclass(frozen=True)
class LinearOperator:
    """A square linear map given only by its action on vectors."""

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.apply(x)

    @classmethod
    def from_matrix(cls, m) -> "LinearOperator":
        m = _check_square(m)
        return cls(m.shape[0], lambda x: m @ x)


def conjugate_gradient(op, b, tol: float = 1e-8, max_iter: int | None = None, x0=None) -> np.ndarray:
    """Unpreconditioned CG for an SPD operator.

    Returns ``x`` with ``||op(x) - b||_2 <= tol * ||b||_2``; raises
    :class:`MaxIterations` otherwise.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(op, np.ndarray):
        op = LinearOperator.from_matrix(op)
    b = np.asarray(b, dtype=float)
    if b.shape != (op.dim,):
        raise DimensionMismatch(f"rhs shape {b.shape} does not match operator dim {op.dim}")
    if max_iter is None:
        max_iter = 10 * op.dim
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    target = tol * bnorm
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - op(x) if x0 is not None else b.copy()
    rr = r @ r
    if np.sqrt(rr) <= target:
        return x
    d = r.copy()
    for _ in range(max_iter):
        q = op(d)
        dq = d @ q
        if dq <= 0:
            raise MaxIterations("operator is not positive definite along a search direction")
        alpha = rr / dq
        x += alpha * d
        r -= alpha * q
        rr_new = r @ r
        if np.sqrt(rr_new) <= target:
            return x
        d = r + (rr_new / rr) * d
        rr = rr_new
    raise MaxIterations(f"CG did not reach relative residual {tol} in {max_iter} iterations")


def operator_norm(x, tol: float = 1e-10, max_iter: int = 20000) -> float:
    """Spectral norm ``sqrt(lambda_max(X^T X))`` by power iteration."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("operator_norm expects a matrix")
    if not np.any(x):
        return 0.0
    gram = x.T @ x
    v = np.random.Generator(np.random.Philox(0)).standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    rq = float(v @ gram @ v)
    for _ in range(max_iter):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector in the null space; restart on a basis vector
            v = np.zeros_like(v)
            v[np.argmax(np.diag(gram))] = 1.0
            continue
        v = w / nw
        rq_new = float(v @ gram @ v)
        if abs(rq_new - rq) <= tol * rq_new:
            return float(np.sqrt(rq_new))
        rq = rq_new
    raise NoConvergence(f"power iteration did not converge in {max_iter} iterations")


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    prow = tab[row] / tab[row, col]
    tab -= np.outer(tab[:, col], prow)
    tab[row] = prow


def _run_simplex(tab, basis, allowed, tol, max_iter, phase, rule):
    m = len(basis)
    rhs = tab.shape[1] - 1
    degenerate = 0
    for _ in range(max_iter):
        cost = tab[m, :rhs]
        cand = np.flatnonzero((cost < -tol) & allowed)
        if cand.size == 0:
            return
        # Dantzig pricing until a run of degenerate pivots, then Bland (no cycling)
        if rule == "bland" or degenerate > _DEGENERATE_RUN:
            col = cand[0]
        else:
            col = cand[np.argmin(cost[cand])]
        column = tab[:m, col]
        pos = np.flatnonzero(column > tol)
        if pos.size == 0:
            raise Unbounded("objective is unbounded below")
        ratios = tab[pos, rhs] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        row = ties[np.argmin([basis[i] for i in ties])]
        degenerate = degenerate + 1 if best <= tol else 0
        _pivot(tab, row, col)
        basis[row] = col
    raise MaxIterations(f"simplex phase {phase} exceeded {max_iter} pivots")


_DEGENERATE_RUN = 50


def simplex_lp(c, A_ub, b_ub, tol: float = 1e-9, max_iter: int | None = None, rule: str = "dantzig") -> np.ndarray:
    """Solve ``min c^T x  s.t.  A_ub x <= b_ub, x >= 0`` by two-phase simplex.

    Dense tableau. Leaving variables follow Bland's smallest-index rule.
    Entering variables use Dantzig's most-negative reduced cost
    (``rule="dantzig"``) until a run of degenerate pivots, after which the
    phase finishes under Bland's rule, so the method cannot cycle;
    ``rule="bland"`` uses the smallest index throughout. The returned basic
    solution is recomputed from the final basis by a direct solve.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise DimensionMismatch("inconsistent LP dimensions")
    if max_iter is None:
        max_iter = 50 * (m + n) + 100

    neg = b < 0
    n_art = int(neg.sum())
    N = n + m + n_art
    tab = np.zeros((m + 1, N + 1))
    tab[:m, :n] = A
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, N] = b
    tab[:m][neg] *= -1.0
    basis = list(range(n, n + m))
    art_rows = np.flatnonzero(neg)
    for k, i in enumerate(art_rows):
        tab[i, n + m + k] = 1.0
        basis[i] = n + m + k

    allowed = np.ones(N, dtype=bool)
    if n_art:
        tab[m, n + m :N] = 1.0
        tab[m] -= tab[art_rows].sum(axis=0)
        _run_simplex(tab, basis, allowed, tol, max_iter, 1, rule)
        infeas = -tab[m, N]
        if infeas > 1e-8 * max(1.0, np.abs(b).max()):
            raise Infeasible(f"no feasible point (phase-1 residual {infeas:.3g})")
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n + m:
                nz = np.flatnonzero(np.abs(tab[i, : n + m]) > tol)
                if nz.size:
                    _pivot(tab, i, nz[0])
                    basis[i] = nz[0]
                else:
                    keep[i] = False
        rows = np.append(np.flatnonzero(keep), m)
        tab = np.hstack([tab[rows][:, : n + m], tab[rows][:, [N]]])
        basis = [basis[i] for i in np.flatnonzero(keep)]
        N = n + m
        allowed = np.ones(N, dtype=bool)
    else:
        keep = np.ones(m, dtype=bool)

    mm = len(basis)
    cost = np.concatenate([c, np.zeros(m)])
    tab[mm, :] = 0.0
    tab[mm, :N] = cost
    for i, j in enumerate(basis):
        if cost[j] != 0.0:
            tab[mm] -= cost[j] * tab[i]
    _run_simplex(tab, basis, allowed, tol, max_iter, 2, rule)

    # recompute the basic solution from the original data for accuracy
    full = np.hstack([A, np.eye(m)])[keep]
    bk = b[keep]
    B = full[:, basis]
    try:
        xb = np.linalg.solve(B, bk)
    except np.linalg.LinAlgError:
        xb = tab[:mm, N]
    z = np.zeros(n + m)
    z[basis] = xb
    x = z[:n]
    x[np.abs(x) < 1e-14] = 0.0
    return np.maximum(x, 0.0)

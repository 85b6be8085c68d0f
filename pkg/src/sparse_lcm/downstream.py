"""Applications built on a covariance estimate.

* Quadratic discriminant analysis with per-class covariance estimates, plus a
  stratified random-split harness for misclassification rates.
* Correlation-distance hierarchical clustering (``d = 1 - r``).
* A nonparametric bootstrap estimate of ``Cov{vech(S)}``, usable in place of
  the Gaussian formula via :meth:`ErrorPrecision.from_error_cov`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .admm import pd_project, default_delta
from .densela import cholesky_factor
from .exceptions import (
    ClassTooSmall,
    DimensionMismatch,
    DimensionTooLarge,
    InvalidCorrelation,
    NonPositiveVariance,
)
from .simbench import rng_from_seed
from .symvec import index_partition
from .tuning import grid_search, soft_grid_search
from .wishart import EXPLICIT_MAX_P

__all__ = [
    "QdaModel",
    "Dendrogram",
    "COVARIANCE_METHODS",
    "class_covariance",
    "qda_fit",
    "qda_discriminants",
    "qda_classify",
    "qda_predict",
    "stratified_splits",
    "qda_split_protocol",
    "corr_from_cov",
    "hier_cluster",
    "bootstrap_error_cov",
]

CORR_TOL = 1e-8


def _sample_cov(y: np.ndarray) -> np.ndarray:
    s = y.T @ y / y.shape[0]
    return 0.5 * (s + s.T)


def _cov_sample(y, n):
    s = _sample_cov(y)
    return pd_project(s, default_delta(s))


def _cov_soft(y, n):
    return soft_grid_search(_sample_cov(y), n).sigma_hat


def _cov_splcm(y, n):
    return grid_search(_sample_cov(y), n).fit.sigma_hat


COVARIANCE_METHODS: dict[str, Callable] = {
    "sample": _cov_sample,
    "soft": _cov_soft,
    "splcm": _cov_splcm,
}


def class_covariance(y_centered, method="splcm") -> np.ndarray:
    """Covariance estimate for centered rows ``y_centered``.

    ``method`` is a key of :data:`COVARIANCE_METHODS` or a callable
    ``f(y_centered, n) -> sigma``.
    """
    y = np.asarray(y_centered, dtype=float)
    fn = COVARIANCE_METHODS[method] if isinstance(method, str) else method
    return np.asarray(fn(y, y.shape[0]), dtype=float)


@dataclass(frozen=True)
class QdaModel:
    classes: np.ndarray
    means: np.ndarray
    covariances: tuple
    priors: np.ndarray
    # cached per class: (Cholesky factor, log det Sigma)
    factors: tuple

    @property
    def n_classes(self) -> int:
        return len(self.classes)


def qda_fit(x, labels, covariance="splcm") -> QdaModel:
    """Per-class means, covariance estimates (on class-centered rows) and priors."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    if x.ndim != 2 or labels.shape != (x.shape[0],):
        raise DimensionMismatch("x must be (n, p) with one label per row")
    classes = np.unique(labels)
    means, covs, priors, factors = [], [], [], []
    for g in classes:
        yg = x[labels == g]
        if yg.shape[0] < 2:
            raise ClassTooSmall(f"class {g!r} has {yg.shape[0]} sample(s); at least 2 are needed")
        mu = yg.mean(axis=0)
        sig = class_covariance(yg - mu, covariance)
        fac = cholesky_factor(sig)
        means.append(mu)
        covs.append(sig)
        priors.append(yg.shape[0] / x.shape[0])
        factors.append((fac, fac.logdet()))
    return QdaModel(
        classes=classes,
        means=np.array(means),
        covariances=tuple(covs),
        priors=np.array(priors),
        factors=tuple(factors),
    )


def qda_discriminants(model: QdaModel, y) -> np.ndarray:
    """``-log|Sigma_g| - (y - mu_g)' Sigma_g^{-1} (y - mu_g) + 2 log pi_g`` per row and class."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[1] != model.means.shape[1]:
        raise DimensionMismatch(f"expected {model.means.shape[1]} features, got {y.shape[1]}")
    out = np.empty((y.shape[0], model.n_classes))
    for g, (fac, logdet) in enumerate(model.factors):
        r = y - model.means[g]
        quad = np.einsum("ij,ji->i", r, fac.solve(r.T))
        out[:, g] = -logdet - quad + 2.0 * np.log(model.priors[g])
    return out


def qda_classify(model: QdaModel, y) -> int:
    """Index (0-based) of the class with the largest discriminant; ties go to the lowest."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionMismatch("qda_classify takes a single observation")
    return int(np.argmax(qda_discriminants(model, y)[0]))


def qda_predict(model: QdaModel, y) -> np.ndarray:
    """Class labels for each row of ``y`` (argmax picks the first of tied classes)."""
    idx = np.argmax(qda_discriminants(model, y), axis=1)
    return model.classes[idx]


def stratified_splits(labels, train_frac: float, n_splits: int, seed: int):
    """Yield ``(train_idx, test_idx)`` pairs; each class is split separately.

    Split ``k`` uses ``Philox(seed ^ k)``. Every class keeps at least two
    training rows and one test row.
    """
    labels = np.asarray(labels)
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie in (0, 1)")
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    classes = np.unique(labels)
    members = [np.flatnonzero(labels == g) for g in classes]
    for g, idx in zip(classes, members):
        if idx.size < 3:
            raise ClassTooSmall(f"class {g!r} needs at least 3 rows to split, has {idx.size}")
    for k in range(n_splits):
        rng = rng_from_seed(int(seed) ^ k)
        train, test = [], []
        for idx in members:
            perm = rng.permutation(idx)
            m = int(np.clip(round(train_frac * idx.size), 2, idx.size - 1))
            train.append(perm[:m])
            test.append(perm[m:])
        yield np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def qda_split_protocol(x, labels, covariance="splcm", n_splits: int = 100, train_frac: float = 0.5, seed: int = 0):
    """Misclassification rate on each random stratified split."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    rates = []
    for train, test in stratified_splits(labels, train_frac, n_splits, seed):
        model = qda_fit(x[train], labels[train], covariance)
        pred = qda_predict(model, x[test])
        rates.append(float(np.mean(pred != labels[test])))
    return np.array(rates)


def corr_from_cov(sigma) -> np.ndarray:
    """``r_jk = sigma_jk / sqrt(sigma_jj sigma_kk)`` with an exact unit diagonal."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {sigma.shape}")
    d = np.diag(sigma)
    if np.any(~(d > 0)):
        raise NonPositiveVariance("all variances must be positive")
    sd = np.sqrt(d)
    r = sigma / np.outer(sd, sd)
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


@dataclass(frozen=True)
class Dendrogram:
    """Merge list in the usual linkage convention.

    Leaves are ``0..p-1``; the cluster formed at step ``t`` gets id ``p + t``.
    """

    merges: np.ndarray  # (p-1, 2) int
    heights: np.ndarray  # (p-1,)
    sizes: np.ndarray  # (p-1,)
    labels: tuple

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    def as_linkage(self) -> np.ndarray:
        """Matrix in the layout of ``scipy.cluster.hierarchy.linkage``."""
        return np.column_stack([self.merges.astype(float), self.heights, self.sizes.astype(float)])


def hier_cluster(r, linkage: str = "average", labels=None) -> Dendrogram:
    """Agglomerative clustering on ``d = 1 - r``.

    Among equally distant cluster pairs the one whose smallest leaf indices
    form the lexicographically smallest pair is merged first.
    """
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {r.shape}")
    if linkage not in ("average", "complete"):
        raise ValueError(f"linkage must be 'average' or 'complete', got {linkage!r}")
    p = r.shape[0]
    if not np.all(np.isfinite(r)):
        raise InvalidCorrelation("correlation matrix has non-finite entries")
    if np.abs(np.diag(r) - 1.0).max(initial=0.0) > CORR_TOL:
        raise InvalidCorrelation("correlation matrix must have a unit diagonal")
    if np.abs(r).max(initial=0.0) > 1.0 + CORR_TOL or np.abs(r - r.T).max(initial=0.0) > CORR_TOL:
        raise InvalidCorrelation("correlations must be symmetric and within [-1, 1]")
    labels = tuple(range(p)) if labels is None else tuple(labels)
    if len(labels) != p:
        raise DimensionMismatch("one label per variable is required")

    dist = 1.0 - 0.5 * (r + r.T)
    np.fill_diagonal(dist, np.inf)
    alive = list(range(p))  # slots into dist
    ids = list(range(p))
    size = [1] * p
    first_leaf = list(range(p))
    merges, heights, sizes = [], [], []
    for step in range(p - 1):
        act = np.array(alive)
        sub = dist[np.ix_(act, act)]
        h = sub.min()
        ia, ib = np.nonzero(np.triu(sub == h, 1))
        lead = np.array(first_leaf)[act]
        lo, hi = np.minimum(lead[ia], lead[ib]), np.maximum(lead[ia], lead[ib])
        pick = np.lexsort((hi, lo))[0]
        a, b = int(act[ia[pick]]), int(act[ib[pick]])
        h = float(h)
        if first_leaf[b] < first_leaf[a]:
            a, b = b, a
        merges.append(sorted((ids[a], ids[b])))
        heights.append(h)
        na, nb = size[a], size[b]
        sizes.append(na + nb)
        # Lance-Williams update into slot a
        others = np.array([k for k in alive if k not in (a, b)], dtype=int)
        if linkage == "average":
            d = (na * dist[a, others] + nb * dist[b, others]) / (na + nb)
        else:
            d = np.maximum(dist[a, others], dist[b, others])
        dist[a, others] = d
        dist[others, a] = d
        alive.remove(b)
        ids[a] = p + step
        size[a] = na + nb
        first_leaf[a] = min(first_leaf[a], first_leaf[b])
    return Dendrogram(
        merges=np.array(merges, dtype=int).reshape(-1, 2),
        heights=np.array(heights, dtype=float),
        sizes=np.array(sizes, dtype=int),
        labels=labels,
    )


def bootstrap_error_cov(y, n_boot: int, seed: int, batch: int = 1024) -> np.ndarray:
    """Bootstrap estimate of ``Cov{vech(S)}`` with ``S = Y'Y / n``.

    Rows are resampled with replacement ``n_boot`` times from ``Philox(seed)``;
    the returned matrix is the ``1/(N-1)`` sample covariance of the resampled
    ``vech(S_b)``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise DimensionMismatch("y must be a 2-d data matrix")
    n, p = y.shape
    if p > EXPLICIT_MAX_P:
        raise DimensionTooLarge(f"explicit bootstrap covariance capped at p <= {EXPLICIT_MAX_P}")
    if n_boot < 2:
        raise ValueError("n_boot must be >= 2")
    part = index_partition(p)
    rng = rng_from_seed(seed)
    # products of each row for every vech position
    prods = y[:, part.rows] * y[:, part.cols]
    # one-pass accumulation of mean and scatter (shifted by the full-data vech(S))
    shift = prods.mean(axis=0)
    total = np.zeros(part.length)
    scatter = np.zeros((part.length, part.length))
    done = 0
    while done < n_boot:
        m = min(batch, n_boot - done)
        idx = rng.integers(0, n, size=(m, n))
        counts = np.zeros((m, n))
        np.add.at(counts, (np.repeat(np.arange(m), n), idx.ravel()), 1.0)
        v = counts @ prods / n - shift
        total += v.sum(axis=0)
        scatter += v.T @ v
        done += m
    mean = total / n_boot
    cov = (scatter - n_boot * np.outer(mean, mean)) / (n_boot - 1)
    return 0.5 * (cov + cov.T)

"""Simulation models, Gaussian sampling, accuracy metrics and the benchmark loop.

Three sparse covariance models are provided: an MA(1) band, a random sparse
pattern and a hub pattern. Each gets a constant diagonal chosen so that the
largest-to-smallest eigenvalue ratio equals ``p``.

All randomness uses numpy's counter-based Philox bit generator. Replicate
``i`` of an experiment with base seed ``b`` draws from ``Philox(b ^ i)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .densela import cholesky_factor
from .exceptions import ConditioningFailure, DimensionMismatch, HubDivisibility, NotPositiveDefinite
from .tuning import TuneGrid, grid_search, soft_grid_search

__all__ = [
    "CovModelSpec",
    "GeneratedCov",
    "MetricReport",
    "RocPoint",
    "ReplicateResult",
    "ExperimentResult",
    "rng_from_seed",
    "offdiag_pattern",
    "diagonal_for_ratio",
    "gen_cov",
    "gen_cov_info",
    "sample_gaussian",
    "evaluate",
    "roc_curve",
    "monotone_envelope",
    "run_experiment",
    "METHODS",
]

KINDS = ("MA1", "Random", "Hub")
DEFAULT_VALUES = {"MA1": 0.4, "Random": 1.0, "Hub": 1.0}
ZERO_TOL = 1e-12
MAX_REDRAWS = 1000
SEED_MASK = (1 << 64) - 1
METHODS = ("sample", "soft", "splcm", "splcm-oracle")


def rng_from_seed(seed: int) -> np.random.Generator:
    """Philox-backed generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & SEED_MASK))


@dataclass(frozen=True)
class CovModelSpec:
    kind: str
    p: int
    value: float | None = None
    prob: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.p < 2:
            raise ValueError("p must be >= 2")
        if self.kind == "Hub" and self.p % 5 != 0:
            raise HubDivisibility(f"Hub model needs p divisible by 5, got p={self.p}")
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError("prob must lie in [0, 1]")

    @property
    def magnitude(self) -> float:
        return DEFAULT_VALUES[self.kind] if self.value is None else float(self.value)


@dataclass(frozen=True)
class GeneratedCov:
    sigma: np.ndarray
    diagonal: float
    seed_used: int
    redraws: int


def offdiag_pattern(spec: CovModelSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Symmetric off-diagonal part (zero diagonal) of the model."""
    p, v = spec.p, spec.magnitude
    a = np.zeros((p, p))
    if spec.kind == "MA1":
        i = np.arange(p - 1)
        a[i + 1, i] = v
    elif spec.kind == "Random":
        rng = rng_from_seed(spec.seed) if rng is None else rng
        rows, cols = np.tril_indices(p, -1)
        on = rng.random(rows.size) < spec.prob
        signs = np.where(rng.random(rows.size) < 0.5, -1.0, 1.0)
        a[rows[on], cols[on]] = v * signs[on]
    else:
        rng = rng_from_seed(spec.seed) if rng is None else rng
        block = p // 5
        # 1-indexed hubs j with mod(j, p/5) = 1, partners k = j+1 .. j+p/5-1
        for j in range(1, p + 1):
            if j % block != 1 % block:
                continue
            for k in range(j + 1, min(j + block - 1, p) + 1):
                a[k - 1, j - 1] = v * (-1.0 if rng.random() < 0.5 else 1.0)
    return a + a.T


def diagonal_for_ratio(offdiag: np.ndarray, ratio: float) -> float:
    """Constant ``c`` with ``cond(offdiag + c I) == ratio``.

    With eigenvalues ``mu`` of the off-diagonal part the condition is
    ``(mu_max + c) / (mu_min + c) = ratio``, which is linear in ``c``.
    """
    mu = np.linalg.eigvalsh(offdiag)
    lo, hi = float(mu[0]), float(mu[-1])
    if ratio <= 1.0 or hi - lo <= 1e-12 * max(1.0, abs(hi)):
        raise ConditioningFailure("no diagonal constant achieves the requested condition ratio")
    c = (hi - ratio * lo) / (ratio - 1.0)
    if not c > -lo:
        raise ConditioningFailure("diagonal constant does not give a positive definite matrix")
    return c


def gen_cov_info(spec: CovModelSpec) -> GeneratedCov:
    """Generate the model covariance, redrawing empty Random patterns."""
    seed, redraws = int(spec.seed), 0
    while True:
        a = offdiag_pattern(spec, rng_from_seed(seed))
        if spec.kind != "Random" or np.any(a):
            break
        redraws += 1
        if redraws > MAX_REDRAWS:
            raise ConditioningFailure("Random model produced no off-diagonal entries")
        seed = (seed + 1) & SEED_MASK
    c = diagonal_for_ratio(a, float(spec.p))
    sigma = a + c * np.eye(spec.p)
    return GeneratedCov(sigma=sigma, diagonal=c, seed_used=seed, redraws=redraws)


def gen_cov(spec: CovModelSpec) -> np.ndarray:
    return gen_cov_info(spec).sigma


def sample_gaussian(sigma, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``n`` rows from ``N(0, sigma)`` and the uncentered ``S = Y'Y / n``."""
    sigma = np.asarray(sigma, dtype=float)
    if n < 1:
        raise ValueError("n must be >= 1")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"sigma is not positive definite: {exc}") from exc
    z = rng_from_seed(seed).standard_normal((n, sigma.shape[0]))
    y = z @ chol.T
    return y, (y.T @ y) / n


@dataclass(frozen=True)
class MetricReport:
    offdiag_l2: float
    frobenius: float
    opnorm: float
    tpr: float
    fpr: float
    support_true: int
    support_est: int

    def as_dict(self) -> dict:
        return asdict(self)


def _offdiag_mask(p: int) -> np.ndarray:
    return ~np.eye(p, dtype=bool)


def evaluate(sigma_hat, sigma_star, support=None) -> MetricReport:
    """Distances to the truth and support recovery over ordered pairs ``i != j``.

    ``support`` (boolean ``p x p``) marks estimated nonzeros; by default an
    entry counts as nonzero when ``|x| >= 1e-12``. With no true nonzeros the
    TPR is reported as 1; with no true zeros the FPR is reported as 0.
    """
    a = np.asarray(sigma_hat, dtype=float)
    b = np.asarray(sigma_star, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ or are not square")
    p = a.shape[0]
    diff = a - b
    rows, cols = np.tril_indices(p, -1)
    est = np.abs(a) >= ZERO_TOL if support is None else np.asarray(support, dtype=bool)
    if est.shape != a.shape:
        raise DimensionMismatch("support pattern has the wrong shape")
    off = _offdiag_mask(p)
    truth = (b != 0.0) & off
    est = est & off
    n_true = int(truth.sum())
    n_zero = int((off & ~truth).sum())
    tp = int((est & truth).sum())
    fp = int((est & ~truth).sum())
    return MetricReport(
        offdiag_l2=float(np.linalg.norm(diff[rows, cols])),
        frobenius=float(np.linalg.norm(diff)),
        opnorm=float(np.linalg.norm(diff, 2)),
        tpr=tp / n_true if n_true else 1.0,
        fpr=fp / n_zero if n_zero else 0.0,
        support_true=n_true // 2,
        support_est=int(est.sum()) // 2,
    )


@dataclass(frozen=True)
class RocPoint:
    lam: float
    fpr: float
    tpr: float


def roc_curve(path, sigma_star) -> list[RocPoint]:
    """One ``(fpr, tpr)`` point per ``(lam, support)`` pair, in descending ``lam``."""
    pts = []
    for lam, support in path:
        rep = evaluate(np.asarray(sigma_star), sigma_star, support=support)
        pts.append(RocPoint(float(lam), rep.fpr, rep.tpr))
    pts.sort(key=lambda r: -r.lam)
    return pts


def monotone_envelope(points) -> list[RocPoint]:
    """Sort by FPR and replace each TPR with the running maximum."""
    out, best = [], 0.0
    for pt in sorted(points, key=lambda r: (r.fpr, r.tpr)):
        best = max(best, pt.tpr)
        out.append(RocPoint(pt.lam, pt.fpr, best))
    return out


@dataclass
class ReplicateResult:
    index: int
    seed: int
    metrics: dict
    tuning: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    spec: CovModelSpec
    n: int
    base_seed: int
    sigma_star: np.ndarray
    replicates: list

    def mean(self, method: str, metric: str) -> float:
        return float(np.mean([getattr(r.metrics[method], metric) for r in self.replicates]))

    def std(self, method: str, metric: str) -> float:
        vals = [getattr(r.metrics[method], metric) for r in self.replicates]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    def summary(self) -> dict:
        methods = list(self.replicates[0].metrics) if self.replicates else []
        names = [f for f in MetricReport.__dataclass_fields__]
        return {
            m: {k: {"mean": self.mean(m, k), "sd": self.std(m, k)} for k in names}
            for m in methods
        }


def replicate_seed(base_seed: int, index: int) -> int:
    return (int(base_seed) ^ int(index)) & SEED_MASK


def _run_replicate(index, base_seed, sigma_star, n, methods, grid, threads):
    seed = replicate_seed(base_seed, index)
    _, s = sample_gaussian(sigma_star, n, seed)
    metrics, tuning = {}, {}
    for method in methods:
        if method == "sample":
            metrics[method] = evaluate(s, sigma_star)
        elif method == "soft":
            res = soft_grid_search(s, n)
            metrics[method] = evaluate(res.sigma_hat, sigma_star, support=res.support)
            tuning[method] = {"lambda": res.lam, "bic": res.bic}
        elif method in ("splcm", "splcm-oracle"):
            prec = np.linalg.inv(sigma_star) if method == "splcm-oracle" else None
            res = grid_search(s, n, grid=grid, precision=prec, threads=threads)
            metrics[method] = evaluate(res.fit.sigma_hat, sigma_star, support=res.fit.active_set)
            tuning[method] = {"lambda": res.lam, "rho": res.rho, "bic": res.bic}
        else:
            raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    return ReplicateResult(index=index, seed=seed, metrics=metrics, tuning=tuning)


def run_experiment(
    spec: CovModelSpec,
    n: int,
    replicates: int,
    base_seed: int = 0,
    methods=METHODS,
    grid: TuneGrid | None = None,
    threads: int = 1,
) -> ExperimentResult:
    """Simulate ``replicates`` datasets from one model covariance and score each method.

    The model covariance is generated once from ``spec.seed``. Replicates run on
    up to ``threads`` workers; results are ordered by replicate index.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    sigma_star = gen_cov(spec)
    cholesky_factor(sigma_star)

    def job(i):
        return _run_replicate(i, base_seed, sigma_star, n, tuple(methods), grid, 1)

    if threads > 1 and replicates > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reps = list(pool.map(job, range(replicates)))
    else:
        reps = [job(i) for i in range(replicates)]
    return ExperimentResult(spec=spec, n=n, base_seed=base_seed, sigma_star=sigma_star, replicates=reps)

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from sparse_lcm.admm import (
    AdmmState,
    SigmaSolver,
    SplcmConfig,
    default_delta,
    default_gamma,
    eta_update,
    fit,
    lambda_max,
    pd_project,
    sigma_update,
    soft_threshold,
    soft_threshold_estimate,
    theta_update,
)
from sparse_lcm.exceptions import DimensionMismatch, NonConvergenceWarning
from sparse_lcm.symvec import half_length, index_partition, unvech, vech
from sparse_lcm.wishart import ErrorPrecision, build_error_precision

from conftest import random_spd

TIGHT = dict(eps_abs=1e-10, eps_rel=1e-10, max_iter=5000)


def ma1(p, band=0.4):
    return np.eye(p) + band * (np.eye(p, k=1) + np.eye(p, k=-1))


def sample(rng, sigma, n):
    y = rng.standard_normal((n, sigma.shape[0])) @ np.linalg.cholesky(sigma).T
    return y.T @ y / n


def zero_precision(p, n=10):
    L = half_length(p)
    return ErrorPrecision(p=p, n=n, omega=None, mode="explicit", matrix=np.zeros((L, L)))


class TestSoftThreshold:
    def test_examples(self):
        assert_allclose(soft_threshold(1.2, 0.5), 0.7)
        assert soft_threshold(-0.3, 0.5) == 0.0
        x = np.array([-2.0, 0.1, 3.0])
        assert_allclose(soft_threshold(x, 0.0), x)

    def test_estimate_examples(self):
        s = np.array([[1.0, 0.25, 0.4], [0.25, 2.0, -0.5], [0.4, -0.5, 3.0]])
        assert_allclose(soft_threshold_estimate(s, 0.0), s)
        out = soft_threshold_estimate(s, 0.3)
        assert out[0, 1] == 0.0
        assert_allclose(out[0, 2], 0.1)
        assert_allclose(out[1, 2], -0.2)
        assert_allclose(np.diag(out), np.diag(s))

    def test_per_entry_levels(self):
        s = np.array([[1.0, 0.5], [0.5, 1.0]])
        t = np.array([[9.0, 0.2], [0.2, 9.0]])
        assert_allclose(soft_threshold_estimate(s, t), [[1.0, 0.3], [0.3, 1.0]])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            soft_threshold_estimate(np.eye(2), -1.0)


class TestPdProject:
    @pytest.mark.parametrize("method", ["lapack", "jacobi"])
    def test_examples(self, method):
        a = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert_allclose(pd_project(a, 0.01, method=method), a, atol=1e-10)
        assert_allclose(pd_project(np.diag([1.0, -1.0]), 0.01, method=method), np.diag([1.0, 0.01]), atol=1e-12)
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert_allclose(pd_project(swap, 0.0, method=method), 0.5 * np.ones((2, 2)), atol=1e-12)

    def test_floor_and_distance(self, rng):
        a = rng.standard_normal((8, 8))
        a = a + a.T
        out = pd_project(a, 0.1)
        assert np.linalg.eigvalsh(out)[0] >= 0.1 - 1e-10
        # the projection is the nearest point: no random PD candidate is closer
        for _ in range(20):
            c = pd_project(out + 0.1 * rng.standard_normal((8, 8)), 0.1)
            assert np.linalg.norm(a - out) <= np.linalg.norm(a - c) + 1e-12


class TestUpdates:
    def test_theta_pins_diagonal(self, rng):
        p = 4
        part = index_partition(p)
        s_d = rng.uniform(1, 2, p)
        sigma, eta = rng.standard_normal((2, half_length(p)))
        th = theta_update(sigma, eta, s_d, 0.3, 2.0)
        assert np.array_equal(th[part.d], s_d)
        assert_allclose(th[part.o], soft_threshold(sigma[part.o] + eta[part.o], 0.6))
        th0 = theta_update(sigma, eta, s_d, 0.0, 2.0)
        assert_allclose(th0[part.o], sigma[part.o] + eta[part.o])

    def test_eta(self, rng):
        v = rng.standard_normal(6)
        assert_allclose(eta_update(v, v, v), v)
        assert_allclose(eta_update(np.zeros(6), v + 1.0, np.ones(6)), v)
        # a stalled iterate grows the dual linearly
        e = np.zeros(6)
        for _ in range(2):
            e = eta_update(e, v, np.zeros(6))
        assert_allclose(e, 2 * v)

    def test_zero_operator(self, rng):
        p = 3
        theta = vech(random_spd(rng, p))
        eta = 0.01 * rng.standard_normal(half_length(p))
        st_ = AdmmState(sigma=theta.copy(), theta=theta, eta=eta)
        cfg = SplcmConfig(lam=0.1, gamma=1.0)
        out = sigma_update(st_, zero_precision(p), theta, cfg, delta=0.0)
        assert_allclose(out, theta - eta, atol=1e-12)

    def test_small_gamma_limit(self, rng):
        p = 4
        ep = build_error_precision(random_spd(rng, p), 50)
        s = vech(random_spd(rng, p))
        theta = vech(random_spd(rng, p) + 2 * np.eye(p))
        eta = 0.01 * rng.standard_normal(half_length(p))
        st_ = AdmmState(sigma=theta.copy(), theta=theta, eta=eta)
        out = sigma_update(st_, ep, s, SplcmConfig(lam=0.0, gamma=1e-8), delta=0.0)
        assert np.abs(out - (theta - eta)).max() <= 1e-4

    def test_solvers_agree(self, rng):
        p = 12
        ep = build_error_precision(random_spd(rng, p), 80)
        rhs = rng.standard_normal(half_length(p))
        dense = SigmaSolver(ep, 0.7, "dense").solve(rhs)
        cg = SigmaSolver(ep, 0.7, "cg", cg_tol=1e-12).solve(rhs)
        assert np.abs(dense - cg).max() <= 1e-6

    def test_default_gamma(self):
        assert default_gamma(build_error_precision(np.eye(4), 10)) == 1.0
        assert_allclose(default_gamma(build_error_precision(np.diag([2.0, 8.0]), 10)), 1 / 16)
        assert default_gamma(zero_precision(3)) == 1.0


class TestFit:
    def test_full_shrinkage(self, rng):
        s = sample(rng, ma1(6), 100)
        ep = build_error_precision(np.linalg.inv(ma1(6)), 100)
        f = fit(s, ep, SplcmConfig(lam=1.01 * lambda_max(s, ep)))
        assert f.converged
        assert f.support_size == 0
        assert_allclose(f.sigma_hat, np.diag(np.diag(s)))

    def test_below_lambda_max_has_support(self, rng):
        s = sample(rng, ma1(6), 100)
        ep = build_error_precision(np.eye(6), 100)
        f = fit(s, ep, SplcmConfig(lam=0.9 * lambda_max(s, ep)))
        assert f.support_size >= 1

    def test_lambda_zero_returns_sample(self, rng):
        sigma = ma1(8)
        s = sample(rng, sigma, 200)
        ep = build_error_precision(np.linalg.inv(sigma), 200)
        f = fit(s, ep, SplcmConfig(lam=0.0, **TIGHT))
        assert np.abs(f.sigma_hat - s).max() <= 1e-6

    def test_lambda_zero_binding_floor(self, rng):
        # p > n: S is singular and the floor binds. With the diagonal pinned the
        # fit beats every feasible matrix diag(S) + t * offdiag(S).
        p, n = 10, 6
        s = sample(rng, np.eye(p), n)
        ep = build_error_precision(np.eye(p), n)
        f = fit(s, ep, SplcmConfig(lam=0.0, **TIGHT))
        assert np.array_equal(np.diag(f.sigma_hat), np.diag(s))
        assert f.min_eigenvalue >= f.delta - 1e-8

        def loss(m):
            r = vech(s - m)
            return 0.5 * r @ ep.apply(r)

        off = s - np.diag(np.diag(s))
        for t in np.linspace(0, 1, 21):
            cand = np.diag(np.diag(s)) + t * off
            if np.linalg.eigvalsh(cand)[0] >= f.delta:
                assert loss(f.sigma_hat) <= loss(cand) + 1e-8

    @pytest.mark.parametrize("lam", [0.02, 0.05, 0.1])
    def test_identity_precision_is_soft_threshold(self, rng, lam):
        sigma = ma1(10, 0.3)
        s = sample(rng, sigma, 400)
        ep = build_error_precision(np.eye(10), 400)
        f = fit(s, ep, SplcmConfig(lam=lam, **TIGHT))
        ref = soft_threshold_estimate(s, lam)
        assert np.linalg.eigvalsh(ref)[0] > f.delta  # PD constraint inactive
        assert np.abs(f.sigma_hat - ref).max() <= 1e-6

    def test_diagonal_pinned_bitwise(self, rng):
        s = sample(rng, ma1(15), 40)
        ep = build_error_precision(np.linalg.inv(ma1(15)), 40)
        for lam in np.geomspace(lambda_max(s, ep), 1e-3, 8):
            f = fit(s, ep, SplcmConfig(lam=float(lam)))
            assert np.array_equal(np.diag(f.sigma_hat), np.diag(s))

    def test_pd_floor(self, rng):
        s = sample(rng, np.eye(20), 10)  # rank deficient
        ep = build_error_precision(np.eye(20), 10)
        for lam in (0.0, 0.01, 0.1):
            f = fit(s, ep, SplcmConfig(lam=lam, delta=0.05))
            assert f.min_eigenvalue >= 0.05 - 1e-8
            assert np.linalg.eigvalsh(f.sigma_hat)[0] >= 0.05 - 1e-8

    def test_kkt(self, rng):
        sigma = ma1(8)
        s = sample(rng, sigma, 100)
        omega = np.linalg.inv(sigma)
        ep = build_error_precision(omega, 100)
        lam = 0.3 * lambda_max(s, ep)
        f = fit(s, ep, SplcmConfig(lam=lam, **TIGHT))
        st_ = f.state
        part = index_partition(8)
        assert np.abs(st_.sigma - st_.theta).max() <= 1e-4
        assert f.pd_scale == 1.0
        g = ep.apply(st_.theta - vech(s))[part.o]
        th = st_.theta[part.o]
        nz = th != 0
        resid = np.where(nz, g + lam * np.sign(th), np.maximum(np.abs(g) - lam, 0.0))
        assert np.abs(resid).max() <= 1e-3

    @pytest.mark.parametrize("gamma", [0.1, 1.0, 10.0])
    def test_gamma_values_agree(self, rng, gamma):
        sigma = ma1(6)
        s = sample(np.random.default_rng(3), sigma, 100)
        ep = build_error_precision(np.linalg.inv(sigma), 100)
        ref = fit(s, ep, SplcmConfig(lam=0.05, **TIGHT))
        f = fit(s, ep, SplcmConfig(lam=0.05, gamma=gamma, **TIGHT))
        assert f.converged
        assert np.linalg.norm(f.sigma_hat - ref.sigma_hat) <= 1e-5

    def test_dense_cg_agree(self, rng):
        p = 20
        sigma = ma1(p)
        s = sample(rng, sigma, 60)
        ep = build_error_precision(np.linalg.inv(sigma), 60)
        a = fit(s, ep, SplcmConfig(lam=0.05, solver="dense", eps_abs=1e-9, eps_rel=1e-9))
        b = fit(s, ep, SplcmConfig(lam=0.05, solver="cg", cg_tol=1e-12, eps_abs=1e-9, eps_rel=1e-9))
        assert np.linalg.norm(a.sigma_hat - b.sigma_hat) <= 1e-5

    def test_warm_start_same_fixed_point(self, rng):
        s = sample(rng, ma1(8), 80)
        ep = build_error_precision(np.linalg.inv(ma1(8)), 80)
        cold = fit(s, ep, SplcmConfig(lam=0.05, **TIGHT))
        prev = fit(s, ep, SplcmConfig(lam=0.2, **TIGHT))
        warm = fit(s, ep, SplcmConfig(lam=0.05, **TIGHT), init=prev)
        assert np.abs(cold.sigma_hat - warm.sigma_hat).max() <= 1e-6

    def test_nonconvergence_warns(self, rng):
        s = sample(rng, ma1(8), 30)
        ep = build_error_precision(np.linalg.inv(ma1(8)), 30)
        with pytest.warns(NonConvergenceWarning):
            f = fit(s, ep, SplcmConfig(lam=0.05, max_iter=1, eps_abs=1e-14, eps_rel=0.0))
        assert not f.converged
        assert f.iterations == 1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fit(np.eye(3), build_error_precision(np.eye(4), 5), SplcmConfig(lam=0.1))

    def test_config_validation(self):
        for bad in (dict(lam=-1), dict(lam=0, gamma=0), dict(lam=0, max_iter=0), dict(lam=0, solver="x")):
            with pytest.raises(ValueError):
                SplcmConfig(**bad)

    def test_default_delta(self):
        assert_allclose(default_delta(np.diag([1.0, 3.0])), 2e-4)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(3, 8), frac=st.floats(0.05, 0.8))
def test_soft_threshold_equivalence(seed, p, frac):
    rng = np.random.default_rng(seed)
    s = sample(rng, ma1(p, 0.3), 300)
    ep = build_error_precision(np.eye(p), 300)
    lam = frac * lambda_max(s, ep)
    ref = soft_threshold_estimate(s, lam)
    if np.linalg.eigvalsh(ref)[0] <= default_delta(s):
        return
    f = fit(s, ep, SplcmConfig(lam=lam, **TIGHT))
    assert np.abs(f.sigma_hat - ref).max() <= 1e-6


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 10), lam=st.floats(0.0, 0.5))
def test_pin_and_floor(seed, p, lam):
    rng = np.random.default_rng(seed)
    s = sample(rng, random_spd(rng, p), max(2, p // 2))
    ep = build_error_precision(np.eye(p), 5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        f = fit(s, ep, SplcmConfig(lam=lam, max_iter=200))
    if np.all(np.diag(s) >= f.delta):
        assert np.array_equal(np.diag(f.sigma_hat), np.diag(s))
    assert f.min_eigenvalue >= f.delta - 1e-8
    assert np.array_equal(f.sigma_hat, f.sigma_hat.T)

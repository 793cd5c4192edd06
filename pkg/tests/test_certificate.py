import math

import numpy as np
import pytest

from robreg.certificate import (C_EST, build_truncation_set, certificate_sample_size, certify,
                                certify_direction, sigma_normalize, truncated_fourth_moment_norm)
from robreg.core import Dataset, LinearModelSpec, SpikedCovariance, random_unit_vector
from robreg.oracles import dense_symmetric_eigen
from robreg.sampling import sample_clean


def _data(X):
    X = np.asarray(X, dtype=np.float64)
    return Dataset.from_xy(X, np.zeros(X.shape[0]))


def _dense_norm(X, u, G):
    XG = X[G]
    M = (XG * ((XG @ u) ** 2)[:, None]).T @ XG / len(G)
    return dense_symmetric_eigen(M)[0][-1]


def _identity_model(d):
    return LinearModelSpec.from_covariance(np.eye(d), np.zeros(d), 1.0)


class TestTruncationSet:
    def test_zero_rows_kept(self):
        D = _data(np.zeros((7, 3)))
        np.testing.assert_array_equal(build_truncation_set(D, np.eye(3)[0], 0.1, 1.0), np.arange(7))

    def test_projection_threshold(self):
        eps = 0.1
        X = np.zeros((3, 2))
        X[1, 0] = math.sqrt(21 / eps)
        X[2, 0] = math.sqrt(19 / eps)
        G = build_truncation_set(_data(X), np.eye(2)[0], eps, 1e6)
        np.testing.assert_array_equal(G, [0, 2])

    def test_norm_threshold(self):
        eps, L, d = 0.5, 1.0, 2
        X = np.zeros((2, d))
        X[1, 1] = math.sqrt(20 * L * d / eps ** 2) * 1.01
        G = build_truncation_set(_data(X), np.eye(2)[0], eps, L)
        np.testing.assert_array_equal(G, [0])

    def test_rejects_eps(self):
        with pytest.raises(ValueError):
            build_truncation_set(_data(np.zeros((2, 2))), np.eye(2)[0], 0.0, 1.0)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((500, 5)) * 3
        u = random_unit_vector(5, rng)
        perm = rng.permutation(500)
        G = build_truncation_set(_data(X), u, 0.3, 1.0)
        Gp = build_truncation_set(_data(X[perm]), u, 0.3, 1.0)
        np.testing.assert_array_equal(np.sort(perm[Gp]), G)
        assert G.size < 500

    def test_gaussian_retention(self):
        d, eps, n = 30, 0.1, 10**5
        D = sample_clean(_identity_model(d), n, 1)
        rng = np.random.default_rng(2)
        ok = sum(build_truncation_set(D, random_unit_vector(d, rng), eps, 1.0).size >= (1 - eps ** 2) * n
                 for _ in range(100))
        assert ok >= 99


class TestFourthMomentNorm:
    def test_rank_one(self):
        D = _data([[1.0, 0.0, 0.0]])
        assert truncated_fourth_moment_norm(D, np.eye(3)[0], [0]) == pytest.approx(1.0, rel=1e-12)

    def test_two_rows(self):
        D = _data(np.eye(2))
        u = np.ones(2) / math.sqrt(2)
        assert truncated_fourth_moment_norm(D, u, [0, 1]) == pytest.approx(0.25, rel=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            truncated_fourth_moment_norm(_data(np.eye(2)), np.ones(2), [])

    @pytest.mark.parametrize("d", [3, 17, 50])
    def test_dense_oracle(self, d):
        rng = np.random.default_rng(d)
        X = rng.standard_normal((4000, d)) @ rng.standard_normal((d, d)) / math.sqrt(d)
        u = random_unit_vector(d, rng)
        G = np.flatnonzero(rng.random(4000) < 0.9)
        val = truncated_fourth_moment_norm(_data(X), u, G, tol=1e-12, max_iter=100000)
        assert val == pytest.approx(_dense_norm(X, u, G), rel=1e-6)

    def test_nested_subsets(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((3000, 6))
        u = random_unit_vector(6, rng)
        D = _data(X)
        G_small = np.arange(1000)
        G_big = np.arange(3000)
        a = truncated_fourth_moment_norm(D, u, G_small, tol=1e-12, max_iter=100000)
        b = truncated_fourth_moment_norm(D, u, G_big, tol=1e-12, max_iter=100000)
        # the summed form only grows when PSD terms are added
        assert 3000 * b >= 1000 * a * (1 - 1e-9)
        assert b <= a * 3000 / 1000

    def test_gaussian_bound(self):
        d, n = 30, 10**5
        D = sample_clean(_identity_model(d), n, 5)
        rng = np.random.default_rng(6)
        vals = []
        for _ in range(20):
            u = random_unit_vector(d, rng)
            vals.append(truncated_fourth_moment_norm(D, u, build_truncation_set(D, u, 0.1, 1.0)))
        assert max(vals) <= C_EST
        # the population value is 3 along u
        assert np.median(vals) == pytest.approx(3.0, rel=0.15)


class TestCertify:
    def test_clean_identity(self):
        d = 30
        D = sample_clean(_identity_model(d), 10**5, 7)
        reps = certify(D, _identity_model(d), 0.1, 20, seed=8)
        assert sum(r.passed for r in reps) >= 19
        for r in reps:
            assert r.g_u_size <= r.n
            assert 0 <= r.frac_big_norm <= 1 and 0 <= r.frac_big_proj <= 1
            assert r.passed == (r.g_u_size >= (1 - 0.01) * r.n and r.spectral_value <= r.bound_value)

    def test_heavy_rows_fail(self):
        eps, d, n = 0.3, 5, 2000
        rng = np.random.default_rng(9)
        X = rng.standard_normal((n, d))
        u = np.eye(d)[0]
        k = n // 5
        X[:k] = 0
        X[:k, 0] = math.sqrt(0.95 * 20 / eps)
        X[:k, 1] = rng.choice([-1.0, 1.0], k) * 8.0
        rep = certify_direction(_data(X), _identity_model(d), eps, u)
        assert rep.g_u_size == n
        assert not rep.passed and rep.spectral_value > rep.bound_value

    def test_many_outliers_shrink_set(self):
        eps, d, n = 0.3, 5, 2000
        X = np.random.default_rng(10).standard_normal((n, d))
        X[:200, 0] = 100.0
        rep = certify_direction(_data(X), _identity_model(d), eps, np.eye(d)[0])
        assert rep.g_u_size < (1 - eps ** 2) * n and not rep.passed

    def test_spiked_normalization(self):
        d, kappa = 30, 8.0
        v = random_unit_vector(d, 11)
        m = LinearModelSpec.from_spike(SpikedCovariance(v, kappa), np.zeros(d), 1.0)
        D = sample_clean(m, 50000, 12)
        rep = certify_direction(D, m, 0.1, v)
        np.testing.assert_allclose(rep.u, math.sqrt(kappa) * v, rtol=1e-12)
        assert rep.bound_value == pytest.approx(C_EST * 1.0)
        # Sigma + 2 Sigma u u^T Sigma has eigenvalue 3/kappa along v and 1 off it
        assert 1.0 <= rep.spectral_value <= 1.2
        assert rep.passed

    def test_sigma_normalize_dense(self):
        m = LinearModelSpec.from_covariance(np.diag([4.0, 1.0]), np.zeros(2), 1.0)
        np.testing.assert_allclose(sigma_normalize([1.0, 0.0], m), [0.5, 0.0])

    def test_trials(self):
        with pytest.raises(ValueError):
            certify(_data(np.eye(2)), _identity_model(2), 0.1, 0)

    def test_sample_size(self):
        assert certificate_sample_size(30, 0.1) == 10**6
        assert certificate_sample_size(10, 0.5) == math.ceil(10 * math.log(10) / 0.0625)

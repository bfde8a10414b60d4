import numpy as np
import pytest
import scipy.linalg

from ddreg.core import DDRError
from ddreg.kernels import rbf_gram
from ddreg.krr import krr_fit, krr_loo, krr_predict

from oracles import loo_refits


def test_single_point_shrinkage():
    fit = krr_fit([[0.3]], [[1.0]], 0.1, 1.0)
    assert fit.coef[0, 0] == pytest.approx(1 / 1.1, rel=1e-14)
    assert krr_predict(fit, [[0.3]])[0, 0] == pytest.approx(0.909091, abs=1e-6)


def test_zero_targets():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(8, 2))
    fit = krr_fit(X, np.zeros((8, 5)), 1e-3, 1.0)
    np.testing.assert_array_equal(fit.coef, 0.0)
    np.testing.assert_array_equal(krr_predict(fit, rng.normal(size=(3, 2))), 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_fit_matches_general_solver(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(10, 3))
    T = rng.normal(size=(10, 4))
    fit = krr_fit(X, T, 1e-2, 1.5)
    K = rbf_gram(X, X, 1.5)
    A = scipy.linalg.solve(K + 10 * 1e-2 * np.eye(10), T, assume_a="gen")
    np.testing.assert_allclose(fit.coef, A, atol=1e-8)
    resid = (K + 10 * 1e-2 * np.eye(10)) @ fit.coef - T
    assert np.abs(resid).max() < 1e-8 * max(1, np.abs(T).max())


def test_ridgeless_interpolation():
    X = np.arange(5.0)[:, None] * 2.0
    T = np.random.default_rng(1).normal(size=(5, 3))
    fit = krr_fit(X, T, 1e-10, 1.0)
    np.testing.assert_allclose(krr_predict(fit, X), T, atol=1e-3)


def test_far_query_vanishes():
    rng = np.random.default_rng(2)
    fit = krr_fit(rng.normal(size=(6, 2)), rng.normal(size=(6, 2)), 1e-2, 1.0)
    np.testing.assert_array_equal(krr_predict(fit, [[1e4, 1e4]]), 0.0)


def test_predict_dimension_mismatch():
    fit = krr_fit(np.zeros((3, 2)) + np.arange(3)[:, None], np.ones((3, 1)), 1e-2, 1.0)
    with pytest.raises(DDRError):
        krr_predict(fit, np.zeros((1, 3)))


@pytest.mark.parametrize("n", [3, 7, 30, 50])
def test_loo_matches_refits(n):
    rng = np.random.default_rng(n)
    X = rng.normal(size=(n, 2))
    T = rng.normal(size=(n, 6))
    for ridge in (1e-1, 1e-3):
        bw = rng.uniform(0.5, 2.0)
        np.testing.assert_allclose(krr_loo(X, T, ridge, bw), loo_refits(X, T, ridge, bw), atol=1e-8)


def test_loo_constant_targets_heavy_ridge():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(12, 2))
    T = np.full((12, 3), 2.5)
    loo = krr_loo(X, T, 10.0, 1.0)
    np.testing.assert_allclose(loo, loo_refits(X, T, 10.0, 1.0), atol=1e-8)
    assert np.all((loo >= 0) & (loo <= 2.5))


def test_loo_leverage_saturation():
    # isolated points and a vanishing ridge: every H_ii = 1 / (1 + 4e-14)
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    with pytest.raises(DDRError, match="leverage saturation"):
        krr_loo(X, np.ones((4, 2)), 1e-14, 0.01)


def test_duplicate_rows_cap_leverage():
    # a duplicated pair shares its fit, so its leverage stays near 1/2
    X = np.array([[0.0], [0.0], [1.0], [2.0]])
    T = np.random.default_rng(0).normal(size=(4, 2))
    loo = krr_loo(X, T, 1e-12, 1.0)
    np.testing.assert_allclose(loo[0], T[1], atol=1e-6)


def test_loo_needs_three_rows():
    with pytest.raises(DDRError):
        krr_loo([[0.0], [1.0]], [[1.0], [2.0]], 1e-2, 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_monotone_shrinkage(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(15, 2))
    T = rng.normal(size=(15, 4))
    norms = [np.linalg.norm(krr_fit(X, T, lam, 1.0).coef) for lam in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))

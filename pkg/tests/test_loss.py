import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import erf

from ddreg.core import EvaluationGrid, make_grid
from ddreg.loss import empirical_mise, interp_density, interp_rows, trapezoid_auc, true_mise


def npdf(z, mu, sd):
    return np.exp(-0.5 * ((z - mu) / sd) ** 2) / (math.sqrt(2 * math.pi) * sd)


def gauss_l2(mu1, s1, mu2, s2):
    """Closed-form int (N(mu1, s1^2) - N(mu2, s2^2))^2 dz."""
    return (1 / (2 * math.sqrt(math.pi) * s1) + 1 / (2 * math.sqrt(math.pi) * s2)
            - 2 * npdf(mu1 - mu2, 0.0, math.hypot(s1, s2)))


G01 = EvaluationGrid([0.0, 0.5, 1.0])
G012 = EvaluationGrid([0.0, 1.0, 2.0])


def test_interp_midpoint():
    assert interp_density([0.0, 1.0, 2.0], G01, 0.25) == 0.5


def test_interp_knots_exact():
    rng = np.random.default_rng(0)
    grid = make_grid([-3.3, 7.1], 57)
    v = rng.uniform(0, 5, 57)
    for k in range(57):
        assert interp_density(v, grid, grid.points[k]) == v[k]
    rows = np.tile(v, (57, 1))
    np.testing.assert_array_equal(interp_rows(rows, grid, grid.points), v)


def test_interp_outside_is_zero():
    assert interp_density([1.0, 1.0, 1.0], G01, 2.0) == 0.0
    assert interp_density([1.0, 1.0, 1.0], G01, -1e-9) == 0.0


@settings(max_examples=100, deadline=None)
@given(arrays(float, 9, elements=st.floats(0, 10)), st.floats(-2, 12))
def test_interp_rows_matches_numpy_and_stays_nonnegative(v, z):
    grid = EvaluationGrid(np.linspace(0.0, 10.0, 9))
    got = interp_rows(v[None, :], grid, np.array([z]))[0]
    assert got >= 0
    assert got == pytest.approx(np.interp(z, grid.points, v, left=0, right=0), abs=1e-12)


def test_trapezoid_examples():
    assert trapezoid_auc([1.0, 1.0, 1.0], G01) == 1.0
    assert trapezoid_auc([0.0, 1.0, 0.0], G012) == 1.0
    assert trapezoid_auc([-1.0, 2.0, 2.0], G012) == 2.5


def test_trapezoid_second_order():
    exact = erf(5 / math.sqrt(2))
    errs = []
    for d in (50, 100):
        grid = EvaluationGrid(np.linspace(-5, 5, d))
        errs.append(abs(trapezoid_auc(npdf(grid.points, 0, 1), grid) - exact))
    assert 2.0 <= errs[0] / errs[1] <= 6.0


def test_empirical_mise_flat_unit():
    grid = EvaluationGrid(np.linspace(0, 1, 11))
    assert empirical_mise(np.ones((1, 11)), [0.5], grid) == pytest.approx(-1.0, abs=1e-14)


def test_empirical_mise_zero():
    grid = make_grid([0, 1], 5)
    assert empirical_mise(np.zeros((4, 5)), [0.1, 0.2, 0.3, 2.0], grid) == 0.0


def test_empirical_mise_prefers_peak():
    # both rows have area 2 on {0, 1, 2}; observed y = 1
    peaked = empirical_mise([[0.5, 1.5, 0.5]], [1.0], G012)
    flat = empirical_mise([[1.0, 1.0, 1.0]], [1.0], G012)
    assert peaked == pytest.approx(2.5 - 3.0)
    assert flat == pytest.approx(0.0)
    assert peaked < flat


def test_true_mise_identity():
    grid = EvaluationGrid(np.linspace(-6, 6, 500))
    X = np.random.default_rng(0).normal(size=(10, 2))
    oracle = lambda z, x: npdf(z, x[0], 1.0)  # noqa: E731
    assert true_mise(lambda x: oracle(grid.points, x), oracle, X, grid) < 1e-6


def test_true_mise_zero_estimate():
    grid = EvaluationGrid(np.linspace(-5, 5, 500))
    got = true_mise(lambda x: np.zeros(500), lambda z, x: npdf(z, 0, 1), np.zeros((3, 1)), grid)
    assert got == pytest.approx(1 / (2 * math.sqrt(math.pi)), abs=1e-6)
    assert got == pytest.approx(0.282095, abs=1e-6)


def test_true_mise_smoothed_gaussian():
    h = 0.2
    grid = EvaluationGrid(np.linspace(-10, 10, 4001))
    s = math.sqrt(1 + h * h)
    got = true_mise(lambda x: npdf(grid.points, 0, s), lambda z, x: npdf(z, 0, 1), np.zeros((1, 1)), grid)
    assert got == pytest.approx(gauss_l2(0, s, 0, 1), abs=1e-6)


def test_empirical_mise_unbiased_for_true_mise():
    """E[empirical loss] + int int f^2 equals the MISE of a fixed estimate."""
    sd_true, sd_est, slope = 0.1, 0.15, 0.9
    grid = EvaluationGrid(np.linspace(-6, 6, 2401))
    # closed form under x1 ~ N(0, 1): the mean gap (slope - 1) x1 ~ N(0, 0.01)
    ff = 1 / (2 * math.sqrt(math.pi) * sd_true)
    cross = npdf(0.0, 0.0, math.sqrt(sd_true**2 + sd_est**2 + (1 - slope) ** 2))
    exact = 1 / (2 * math.sqrt(math.pi) * sd_est) + ff - 2 * cross

    rng = np.random.default_rng(12)
    vals = []
    for _ in range(200):
        x = rng.normal(size=50)
        y = x + sd_true * rng.normal(size=50)
        est = npdf(grid.points[None, :], slope * x[:, None], sd_est)
        vals.append(empirical_mise(est, y, grid) + ff)
    vals = np.asarray(vals)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - exact) < 3 * se

    xs = rng.normal(size=(4000, 1))
    mc = true_mise(lambda x: npdf(grid.points, slope * x[0], sd_est),
                   lambda z, x: npdf(z, x[0], sd_true), xs, grid)
    assert mc == pytest.approx(exact, rel=0.05)

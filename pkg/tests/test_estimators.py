import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dptheilsen.audit import density_log_ratio, dp_theil_sen_density, k_half_densities, k_half_log_ratio
from dptheilsen.core import Dataset, DatasetError, all_pairs_slopes
from dptheilsen.dpwide import QueryError
from dptheilsen.estimators import (
    EstimationError,
    Variant,
    dp_theil_sen,
    dp_theil_sen_k_half,
    median,
    ols_fit,
    theil_sen,
    theil_sen_half,
)


def test_ols_examples():
    x = np.arange(6.0)
    fit = ols_fit(Dataset(x, 2 * x + 1))
    assert fit.beta == pytest.approx(2) and fit.alpha == pytest.approx(1)
    assert ols_fit(Dataset([0, 1], [0, 3])).beta == pytest.approx(3)
    # sxx = 2, sxy = (-1)(-1) + 0(-1) + 1(2) = 3
    assert ols_fit(Dataset([0, 1, 2], [0, 0, 3])).beta == pytest.approx(1.5)


def test_ols_matches_lstsq():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=30), rng.normal(size=30)
    A = np.column_stack([np.ones_like(x), x])
    alpha, beta = np.linalg.lstsq(A, y, rcond=None)[0]
    fit = ols_fit(Dataset(x, y))
    assert fit.beta == pytest.approx(beta) and fit.alpha == pytest.approx(alpha)


def test_ols_zero_variance():
    with pytest.raises(DatasetError):
        ols_fit(Dataset([1, 1, 1], [0, 1, 2]))


def test_theil_sen_examples():
    assert theil_sen(Dataset([0, 1, 2], [0, 1, 4])).beta == 2
    assert theil_sen_half(Dataset([0, 1, 2, 3], [0, 2, 3, 9])).beta == 2.5
    assert theil_sen_half(Dataset([0, 1, 5], [0, 7, 1])).beta == 1 / 5


def test_median_convention():
    assert median([1, 2, 3, 10]) == 2.5
    with pytest.raises(EstimationError):
        median([-np.inf, np.inf])
    with pytest.raises(EstimationError):
        median([1.0, np.inf])
    with pytest.raises(EstimationError):
        median([1.0, np.inf, np.inf])
    assert median([np.inf, 1.0, 2.0]) == 2.0


def test_all_slopes_infinite():
    with pytest.raises(EstimationError):
        theil_sen(Dataset([0, 0, 0], [0, 1, 2]))


@pytest.mark.parametrize("n", [2, 3, 10, 101])
@pytest.mark.parametrize("beta", [2.0, -0.75, 0.0])
def test_exact_recovery(n, beta):
    x = np.linspace(-3, 7, n)
    d = Dataset(x, 1.5 + beta * x)
    for fn in (ols_fit, theil_sen, theil_sen_half):
        assert abs(fn(d).beta - beta) <= 1e-12


@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=3, max_size=10, unique_by=lambda t: t[0]),
       st.integers(0, 1000))
@settings(max_examples=40)
def test_order_invariance_and_bracketing(pts, seed):
    pts = np.array(pts, float)
    perm = np.random.default_rng(seed).permutation(len(pts))
    d, d2 = Dataset(pts[:, 0], pts[:, 1]), Dataset(pts[perm, 0], pts[perm, 1])
    for fn in (ols_fit, theil_sen, theil_sen_half):
        assert fn(d).beta == pytest.approx(fn(d2).beta, abs=1e-12)
    s = all_pairs_slopes(d)
    assert s.min() <= theil_sen(d).beta <= s.max()
    assert s.min() <= theil_sen_half(d).beta <= s.max()


@given(st.floats(-5, 5))
@settings(max_examples=20)
def test_theil_sen_tilt_equivariance(gamma):
    rng = np.random.default_rng(4)
    x, y = np.arange(9.0), rng.normal(size=9)
    base = theil_sen(Dataset(x, y)).beta
    assert theil_sen(Dataset(x, y + gamma * x)).beta == pytest.approx(base + gamma, abs=1e-9)


def test_private_range_and_metadata():
    rng = np.random.default_rng(0)
    d = Dataset(np.arange(20.0), rng.normal(size=20) * 50)
    for _ in range(50):
        fit = dp_theil_sen(d, 0.5, 2.0, 0.1, rng)
        assert -2 <= fit.beta <= 2
    assert fit.variant is Variant.DP_TS
    assert fit.meta["eps_mech"] == pytest.approx(0.5 / 19)
    assert fit.meta["N"] == 190
    fit = dp_theil_sen_k_half(d, 1.0, 3, 2.0, 0.1, rng)
    assert fit.meta["N"] == 30 and fit.meta["eps_mech"] == pytest.approx(1 / 6)
    assert fit.meta["k"] == 3 and -2 <= fit.beta <= 2


def test_private_validation():
    d = Dataset([0, 1, 2], [0, 1, 2])
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        dp_theil_sen(d, 0, 1, 0.1, rng)
    with pytest.raises(QueryError):
        dp_theil_sen(d, 1, 1, 1.5, rng)
    with pytest.raises(ValueError):
        dp_theil_sen_k_half(d, 1, 0, 1, 0.1, rng)


def test_private_concentrates_on_noiseless_line():
    x = np.linspace(0, 1, 30)
    d = Dataset(x, 3 - 1.25 * x)
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert abs(dp_theil_sen(d, 1e4, 10, 1e-3, rng).beta + 1.25) <= 1e-3
        assert abs(dp_theil_sen_k_half(d, 1e4, 5, 10, 1e-3, rng).beta + 1.25) <= 1e-3


def _random_neighbours(rng, n, count):
    for _ in range(count):
        x = rng.integers(0, 5, n).astype(float)
        y = rng.normal(size=n).round(1)
        d = Dataset(x, y)
        i = rng.integers(n)
        yield d, d.replace(i, float(rng.integers(0, 5)), round(float(rng.normal(scale=3)), 1))


@pytest.mark.parametrize("eps", [0.5, 2.0])
def test_dp_theil_sen_certificate(eps):
    rng = np.random.default_rng(8)
    for d, d2 in _random_neighbours(rng, 5, 20):
        ratio = density_log_ratio(dp_theil_sen_density(d, eps, 3, 0.1), dp_theil_sen_density(d2, eps, 3, 0.1))
        assert ratio <= eps + 1e-9


@pytest.mark.parametrize("n,k", [(4, 1), (5, 2), (6, 1)])
def test_k_half_certificate(n, k):
    eps = 1.0
    rng = np.random.default_rng(n * 10 + k)
    for d, d2 in _random_neighbours(rng, n, 4):
        assert k_half_log_ratio(d, d2, eps, k, 3, 0.2) <= eps + 1e-9


def test_k_half_sampler_matches_enumerated_mixture():
    d = Dataset([0.0, 1.0, 2.0, 3.0, 4.0], [0.3, -0.2, 1.1, 0.4, 2.0])
    eps, k, R, theta = 2.0, 2, 3.0, 0.1
    dens = k_half_densities(d, eps, k, R, theta)
    rng = np.random.default_rng(0)
    draws = np.array([dp_theil_sen_k_half(d, eps, k, R, theta, rng).beta for _ in range(20_000)])
    for y0 in (-1.0, 0.0, 0.3, 0.6, 1.0, 2.0):
        expected = np.mean([dn.cdf(y0) for dn in dens])
        assert abs(np.mean(draws <= y0) - expected) < 0.015

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dptheilsen.audit import density_log_ratio, k_half_densities, midpoints, mixture_log_pdf
from dptheilsen.core import Dataset, all_pairs_slopes
from dptheilsen.dpwide import QuantileQuery, exact_density
from dptheilsen.intervals import (
    IntervalError,
    c_quantile,
    dp_theil_sen_ci,
    half_width_b,
    normal_cdf,
    normal_quantile,
    privacy_slack_t,
    slope_multiplicity,
    target_quantiles,
)


def mp_quantile(q):
    with mpmath.workdps(60):
        return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(q) - 1))


@pytest.mark.parametrize("q", [1e-12, 1e-6, 0.0125, 0.025, 0.05, 0.3, 0.5, 0.8, 0.975, 0.9875, 1 - 1e-9])
def test_normal_quantile_against_mpmath(q):
    assert normal_quantile(q) == pytest.approx(mp_quantile(q), rel=1e-9, abs=1e-12)


@given(st.floats(1e-10, 1 - 1e-10))
@settings(max_examples=200)
def test_quantile_roundtrip(q):
    assert normal_cdf(normal_quantile(q)) == pytest.approx(q, rel=1e-9, abs=1e-12)


def test_quantile_domain():
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            normal_quantile(bad)


def test_c_quantile():
    assert c_quantile(0.025) == pytest.approx(1.959963984540054, rel=1e-12)
    assert c_quantile(0.025, 100) == pytest.approx(0.1959963984540054, rel=1e-12)


def test_half_width_examples():
    assert half_width_b("half", 100, 0.1) == pytest.approx(math.sqrt(2) * 1.959963984540054 / 10, rel=1e-12)
    assert half_width_b("half", 100, 0.1) == pytest.approx(0.2772, abs=5e-5)
    c = c_quantile(0.025, 100)
    assert half_width_b("ts", 100, 0.1) == pytest.approx(2 / 3 * c)
    assert half_width_b("khalf", 100, 0.1, k=1) == pytest.approx(c)
    # the k-matching width runs from the single-matching value towards the all-pairs value
    ks = [half_width_b("khalf", 100, 0.1, k) for k in (1, 2, 5, 50, 10**6)]
    assert all(a > b for a, b in zip(ks, ks[1:]))
    assert ks[-1] == pytest.approx(math.sqrt(2 / 3) * c, rel=1e-5)


def test_multiplicity():
    assert slope_multiplicity("ts", 50) == 49
    assert slope_multiplicity("khalf", 50, 7) == 14
    assert slope_multiplicity("half", 50) == 2
    with pytest.raises(ValueError):
        slope_multiplicity("bogus", 5)


def test_slack_formula():
    t = privacy_slack_t(0.25, 50, 10, 0.1, 0.1)
    assert t == pytest.approx(math.log(4 * 9.9 / 0.01) / 12.5)


def test_strict_mode_raises_for_tiny_budget():
    d = Dataset(np.arange(10.0), np.arange(10.0))
    with pytest.raises(IntervalError):
        dp_theil_sen_ci(d, 1.0, 0.1, 10, 0.1, variant="half", rng=np.random.default_rng(0))
    with pytest.raises(IntervalError):
        target_quantiles("ts", 10, 45, 0.05, 0.1, 10, 0.1)


def test_non_strict_runs_at_boundary():
    d = Dataset(np.arange(10.0), np.arange(10.0))
    ci = dp_theil_sen_ci(d, 1.0, 0.1, 10, 0.1, variant="half", rng=np.random.default_rng(0), strict=False)
    assert ci.meta["target_outside"]
    assert ci.meta["q_lower"] < 0 and ci.meta["q_upper"] > 1
    assert -10.1 <= ci.lower <= ci.upper <= 10.1


@pytest.mark.parametrize("variant,k", [("ts", 1), ("half", 1), ("khalf", 4)])
def test_ordering_and_range(variant, k):
    rng = np.random.default_rng(1)
    d = Dataset(rng.normal(size=12), rng.normal(size=12))
    swaps = 0
    for _ in range(100):
        ci = dp_theil_sen_ci(d, 0.3, 0.2, 2, 0.05, variant=variant, k=k, rng=rng, strict=False)
        assert ci.lower <= ci.upper
        assert -2.05 <= ci.lower and ci.upper <= 2.05
        swaps += ci.meta["swapped"]
    # with a weak budget the two draws cross now and then
    assert swaps > 0


def test_metadata():
    x = np.linspace(0, 1, 400)
    d = Dataset(x, 2 * x)
    ci = dp_theil_sen_ci(d, 5.0, 0.1, 10, 0.01, variant="khalf", k=3, rng=np.random.default_rng(0))
    m = ci.meta
    assert m["N"] == 600 and m["k"] == 3
    assert m["eps_call"] == pytest.approx(2.5 / 6)
    assert m["q_lower"] == pytest.approx(0.5 - m["b"] - m["t"])
    assert m["asymptotic"] and not m["target_outside"]
    assert ci.nominal_coverage == pytest.approx(0.9)
    assert ci.to_dict()["lower"] == ci.lower


@pytest.mark.parametrize("variant", ["ts", "half", "khalf"])
def test_noiseless_large_budget_is_tight(variant):
    x = np.linspace(0, 1, 200)
    d = Dataset(x, 0.5 - 3 * x)
    theta = 1e-4
    rng = np.random.default_rng(2)
    for _ in range(10):
        ci = dp_theil_sen_ci(d, 1e5, 0.1, 10, theta, variant=variant, k=5, rng=rng)
        assert ci.contains(-3)
        assert ci.width <= 4 * theta + 1e-12


def test_interval_uses_only_quantiles_of_slopes():
    # pure-noise slopes: the interval should bracket the sample median slope at a large budget
    rng = np.random.default_rng(3)
    x = rng.uniform(size=150)
    d = Dataset(x, rng.normal(size=150))
    med = float(np.median(all_pairs_slopes(d)))
    ci = dp_theil_sen_ci(d, 1e4, 0.1, 50, 1e-3, variant="ts", rng=rng)
    assert ci.lower < med < ci.upper


def _ts_call_densities(d, eps, p, R, theta):
    eps_call = 0.5 * eps / (d.n - 1)
    N = d.n * (d.n - 1) // 2
    q_lo, q_hi, _, _ = target_quantiles("ts", d.n, N, eps_call, p, R, theta, strict=False)
    s = all_pairs_slopes(d)
    return [exact_density(s, QuantileQuery(q, R, theta, eps_call, extrapolate=True)) for q in (q_lo, q_hi)]


@pytest.mark.parametrize("eps", [0.5, 2.0])
def test_ts_interval_certificate(eps):
    """The two draws are independent given the data, so log-ratios add."""
    rng = np.random.default_rng(5)
    for _ in range(15):
        x = rng.integers(0, 4, 5).astype(float)
        y = rng.normal(size=5).round(1)
        d = Dataset(x, y)
        d2 = d.replace(int(rng.integers(5)), float(rng.integers(0, 4)), round(float(rng.normal(scale=3)), 1))
        a, b = _ts_call_densities(d, eps, 0.1, 3, 0.1), _ts_call_densities(d2, eps, 0.1, 3, 0.1)
        total = density_log_ratio(a[0], b[0]) + density_log_ratio(a[1], b[1])
        assert total <= eps + 1e-9


def _joint_log_pdf(d, eps, p, R, theta, grid_lo, grid_hi):
    """Joint density of the (lower, upper) draws before the swap, mixed over the matching."""
    eps_call = 0.5 * eps / 2
    N = d.n // 2
    q_lo, q_hi, _, _ = target_quantiles("half", d.n, N, eps_call, p, R, theta, strict=False)
    lo = k_half_densities(d, eps, 1, R, theta, q=q_lo, eps_mech=eps_call)
    hi = k_half_densities(d, eps, 1, R, theta, q=q_hi, eps_mech=eps_call)
    terms = [a.log_pdf(grid_lo)[:, None] + b.log_pdf(grid_hi)[None, :] for a, b in zip(lo, hi)]
    return np.logaddexp.reduce(np.stack(terms), axis=0) - math.log(len(terms)), lo, hi


def test_half_interval_joint_certificate():
    eps, p, R, theta = 1.0, 0.1, 3.0, 0.2
    rng = np.random.default_rng(6)
    for _ in range(6):
        x = rng.integers(0, 5, 4).astype(float)
        y = rng.normal(size=4).round(1)
        d = Dataset(x, y)
        d2 = d.replace(int(rng.integers(4)), float(rng.integers(0, 5)), round(float(rng.normal(scale=3)), 1))
        _, lo1, hi1 = _joint_log_pdf(d, eps, p, R, theta, np.zeros(1), np.zeros(1))
        _, lo2, hi2 = _joint_log_pdf(d2, eps, p, R, theta, np.zeros(1), np.zeros(1))
        g_lo = midpoints(*[dn.edges for dn in lo1 + lo2])
        g_hi = midpoints(*[dn.edges for dn in hi1 + hi2])
        j1, _, _ = _joint_log_pdf(d, eps, p, R, theta, g_lo, g_hi)
        j2, _, _ = _joint_log_pdf(d2, eps, p, R, theta, g_lo, g_hi)
        assert np.max(np.abs(j1 - j2)) <= eps + 1e-9
        # marginals satisfy half the budget each
        assert np.max(np.abs(mixture_log_pdf(lo1, g_lo) - mixture_log_pdf(lo2, g_lo))) <= eps / 2 + 1e-9

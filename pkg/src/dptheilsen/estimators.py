"""Non-private baselines and the private Theil-Sen point estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import Dataset, DatasetError, all_pairs_slopes, k_matching_slopes, sorted_half_slopes
from .dpwide import QuantileQuery, clamp_slopes, dpwide_sample


class Variant(str, Enum):
    OLS = "ols"
    TS = "ts"
    TS_HALF = "half"
    DP_TS = "dpts"
    DP_TS_K_HALF = "dpkhalf"


class EstimationError(ValueError):
    """The estimator is undefined on this input (e.g. an infinite median)."""


@dataclass(frozen=True)
class FitResult:
    beta: float
    variant: Variant
    alpha: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"variant": self.variant.value, "beta": self.beta}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        out.update(self.meta)
        return out


def median(values) -> float:
    """Median with infinities treated as extreme order statistics.

    Even-length input averages the two middle values; an infinite result
    is an error since it carries no slope information.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise EstimationError("median of an empty multiset")
    mid = v.size // 2
    if v.size % 2:
        m = v[mid]
    else:
        lo, hi = v[mid - 1], v[mid]
        if np.isinf(lo) and np.isinf(hi) and lo != hi:
            raise EstimationError("middle order statistics are -inf and +inf")
        m = lo if lo == hi else 0.5 * (lo + hi)
    if not np.isfinite(m):
        raise EstimationError("median slope is infinite; x values are too concentrated")
    return float(m)


def ols_fit(d: Dataset) -> FitResult:
    x, y = d.x, d.y
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    if sxx == 0.0:
        raise DatasetError("all x values are equal")
    beta = float(np.dot(xc, y - y.mean()) / sxx)
    alpha = float(y.mean() - beta * x.mean())
    return FitResult(beta, Variant.OLS, alpha=alpha, meta={"N": d.n})


def theil_sen(d: Dataset) -> FitResult:
    s = all_pairs_slopes(d)
    return FitResult(median(s), Variant.TS, meta={"N": int(s.size)})


def theil_sen_half(d: Dataset) -> FitResult:
    s = sorted_half_slopes(d)
    return FitResult(median(s), Variant.TS_HALF, meta={"N": int(s.size)})


def _check_private(eps, R, theta):
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    # QuantileQuery validates R and theta
    QuantileQuery(0.5, R, theta, 1.0)


def dp_theil_sen(d: Dataset, eps: float, R: float, theta: float,
                 rng: np.random.Generator) -> FitResult:
    """Private median of all pairwise slopes.

    One replaced point changes at most ``n - 1`` slopes, so the
    mechanism runs at ``eps / (n - 1)``.
    """
    _check_private(eps, R, theta)
    s = clamp_slopes(all_pairs_slopes(d), R)
    eps_mech = eps / (d.n - 1)
    beta = dpwide_sample(s, QuantileQuery(0.5, R, theta, eps_mech), rng)
    return FitResult(beta, Variant.DP_TS, meta={
        "epsilon": eps, "eps_mech": eps_mech, "R": R, "theta": theta, "N": int(s.size)})


def dp_theil_sen_k_half(d: Dataset, eps: float, k: int, R: float, theta: float,
                        rng: np.random.Generator) -> FitResult:
    """Private median over ``k`` random matchings between the two ``x`` bins.

    Each point sits in at most ``k`` slopes and a replacement can alter
    both bins, so the mechanism runs at ``eps / (2k)``. ``k = 1`` is the
    private counterpart of the abbreviated estimator.
    """
    _check_private(eps, R, theta)
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    s = clamp_slopes(k_matching_slopes(d, k, rng), R)
    eps_mech = eps / (2 * k)
    beta = dpwide_sample(s, QuantileQuery(0.5, R, theta, eps_mech), rng)
    return FitResult(beta, Variant.DP_TS_K_HALF, meta={
        "epsilon": eps, "eps_mech": eps_mech, "R": R, "theta": theta, "k": k, "N": int(s.size)})
